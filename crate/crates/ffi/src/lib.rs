//! C ABI for the squid-emu instrument session.
//!
//! Every call returns a [`SquidStatus`]; on failure a message is available
//! from [`squid_emu_last_error`] on the same thread. Handles are not
//! thread-safe: use one per thread or lock around them.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use squid_emu::device::retrap_current;
use squid_emu::io::{ErrorCode, ExperimentConfig, InstrumentSession, Key};

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SquidStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Range = 3,
    UnknownKey = 4,
    BufferTooSmall = 5,
    Runtime = 6,
    Panic = 7,
}

/// Opaque instrument handle.
pub struct SquidEmu {
    session: InstrumentSession,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

type Fallible = Result<(), (SquidStatus, String)>;

fn fail<T>(status: SquidStatus, msg: impl Into<String>) -> Result<T, (SquidStatus, String)> {
    Err((status, msg.into()))
}

fn guard(f: impl FnOnce() -> Fallible) -> SquidStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            SquidStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("panic inside squid-emu");
            SquidStatus::Panic
        }
    }
}

fn from_code(code: ErrorCode) -> (SquidStatus, String) {
    let status = match code {
        ErrorCode::Unknown => SquidStatus::UnknownKey,
        ErrorCode::Parse => SquidStatus::InvalidArgument,
        ErrorCode::Range => SquidStatus::Range,
    };
    (status, code.reply().to_string())
}

unsafe fn handle<'a>(h: *mut SquidEmu) -> Result<&'a mut SquidEmu, (SquidStatus, String)> {
    h.as_mut().ok_or((SquidStatus::NullPointer, "null handle".into()))
}

unsafe fn out_ref<'a, T>(p: *mut T) -> Result<&'a mut T, (SquidStatus, String)> {
    p.as_mut().ok_or((SquidStatus::NullPointer, "null output pointer".into()))
}

unsafe fn c_str<'a>(p: *const c_char) -> Result<&'a str, (SquidStatus, String)> {
    if p.is_null() {
        return fail(SquidStatus::NullPointer, "null string");
    }
    CStr::from_ptr(p)
        .to_str()
        .or_else(|_| fail(SquidStatus::InvalidArgument, "string is not UTF-8"))
}

unsafe fn key(p: *const c_char) -> Result<Key, (SquidStatus, String)> {
    let name = c_str(p)?;
    Key::parse(name).ok_or((SquidStatus::UnknownKey, format!("unknown key '{name}'")))
}

/// Create a session with the default device and the given seed.
/// Returns null only if allocation panics. Free with [`squid_emu_free`].
#[no_mangle]
pub extern "C" fn squid_emu_new(seed: u64) -> *mut SquidEmu {
    catch_unwind(|| {
        let cfg = ExperimentConfig::default().emulator;
        Box::into_raw(Box::new(SquidEmu {
            session: InstrumentSession::new(cfg, seed),
        }))
    })
    .unwrap_or(ptr::null_mut())
}

/// Create a session from a `key = value` config file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn squid_emu_new_from_config(path: *const c_char, out: *mut *mut SquidEmu) -> SquidStatus {
    guard(|| {
        let out = out_ref(out)?;
        *out = ptr::null_mut();
        let exp = match ExperimentConfig::load(c_str(path)?) {
            Ok(exp) => exp,
            Err(squid_emu::Error::Io(m)) => return fail(SquidStatus::Runtime, m),
            Err(e) => return fail(SquidStatus::InvalidArgument, e.to_string()),
        };
        let mut session = InstrumentSession::new(exp.emulator, exp.protocol.seed);
        session.set(Key::Idc, &exp.protocol.i_dc.to_string()).map_err(from_code)?;
        *out = Box::into_raw(Box::new(SquidEmu { session }));
        Ok(())
    })
}

/// Release a handle. Null is ignored.
///
/// # Safety
/// `h` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn squid_emu_free(h: *mut SquidEmu) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Set a parameter by key name (`RIN`, `RNORM`, `VTH0`, `VOFF`, `SIGMA`,
/// `MODDEPTH`, `GDC`, `SEED`, `IDC`). `SEED` must be a non-negative integer.
/// The session is unchanged on error.
///
/// # Safety
/// `h` must be a live handle, `key_name` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn squid_emu_set_param(h: *mut SquidEmu, key_name: *const c_char, value: f64) -> SquidStatus {
    guard(|| {
        let h = handle(h)?;
        let k = key(key_name)?;
        h.session.set(k, &value.to_string()).map_err(from_code)
    })
}

/// # Safety
/// `h` must be a live handle, `key_name` a NUL-terminated string, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn squid_emu_get_param(h: *const SquidEmu, key_name: *const c_char, out: *mut f64) -> SquidStatus {
    guard(|| {
        let h = handle(h as *mut SquidEmu)?;
        let k = key(key_name)?;
        let out = out_ref(out)?;
        *out = h.session.get(k).parse().or_else(|_| fail(SquidStatus::Runtime, "value is not numeric"))?;
        Ok(())
    })
}

/// Set the flux-bias current in amperes; clamped to the ADC range.
///
/// # Safety
/// `h` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn squid_emu_set_idc(h: *mut SquidEmu, i_dc: f64) -> SquidStatus {
    guard(|| {
        let h = handle(h)?;
        h.session.set(Key::Idc, &i_dc.to_string()).map_err(from_code)
    })
}

/// Apply one current pulse. `*switched` is 1 if the device switched, else 0.
///
/// # Safety
/// `h` must be a live handle and `switched` valid.
#[no_mangle]
pub unsafe extern "C" fn squid_emu_pulse(h: *mut SquidEmu, i_sq: f64, switched: *mut c_int) -> SquidStatus {
    guard(|| {
        let h = handle(h)?;
        let out = out_ref(switched)?;
        *out = h.session.pulse(i_sq).map_err(from_code)? as c_int;
        Ok(())
    })
}

/// Return the device to the superconducting state and restart the noise
/// counters.
///
/// # Safety
/// `h` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn squid_emu_reset(h: *mut SquidEmu) -> SquidStatus {
    guard(|| {
        let h = handle(h)?;
        h.session.handle_command("RESET");
        Ok(())
    })
}

/// Switching probability at `points` evenly spaced amplitudes in
/// `[imin, imax]`, `pulses` pulses each, written to `out[0..points]`.
///
/// # Safety
/// `h` must be a live handle and `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn squid_emu_s_curve(
    h: *mut SquidEmu,
    imin: f64,
    imax: f64,
    points: usize,
    pulses: u64,
    out: *mut f64,
    out_len: usize,
) -> SquidStatus {
    guard(|| {
        let h = handle(h)?;
        if out.is_null() {
            return fail(SquidStatus::NullPointer, "null output buffer");
        }
        if out_len < points {
            return fail(SquidStatus::BufferTooSmall, format!("need {points} doubles, got {out_len}"));
        }
        let p_sw = h.session.s_curve(imin, imax, points as u64, pulses).map_err(from_code)?;
        std::slice::from_raw_parts_mut(out, points).copy_from_slice(&p_sw);
        Ok(())
    })
}

/// Run one text command (the TCP command set) and copy the reply, NUL
/// terminated, into `reply`. `*needed` receives the reply length plus one.
/// `ERR` replies are returned with status OK. On `BufferTooSmall` the
/// command has already run.
///
/// # Safety
/// `h` must be a live handle, `line` NUL-terminated, `reply` must hold
/// `reply_len` bytes (or be null with `reply_len` 0), `needed` may be null.
#[no_mangle]
pub unsafe extern "C" fn squid_emu_command(
    h: *mut SquidEmu,
    line: *const c_char,
    reply: *mut c_char,
    reply_len: usize,
    needed: *mut usize,
) -> SquidStatus {
    guard(|| {
        let h = handle(h)?;
        let text = h.session.handle_command(c_str(line)?).text;
        let n = text.len() + 1;
        if let Some(needed) = needed.as_mut() {
            *needed = n;
        }
        if reply.is_null() || reply_len < n {
            return fail(SquidStatus::BufferTooSmall, format!("reply needs {n} bytes"));
        }
        ptr::copy_nonoverlapping(text.as_ptr(), reply as *mut u8, text.len());
        *reply.add(text.len()) = 0;
        Ok(())
    })
}

/// Retrapping current of the session's device for comparator threshold `v_th`.
///
/// # Safety
/// `h` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn squid_emu_retrap_current(h: *const SquidEmu, v_th: f64, out: *mut f64) -> SquidStatus {
    guard(|| {
        let h = handle(h as *mut SquidEmu)?;
        let out = out_ref(out)?;
        if !v_th.is_finite() {
            return fail(SquidStatus::InvalidArgument, "v_th is not finite");
        }
        *out = retrap_current(&h.session.cfg, v_th);
        Ok(())
    })
}

/// Flux-modulation voltage added to the threshold at flux bias `i_dc`.
///
/// # Safety
/// `h` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn squid_emu_modulation_voltage(h: *const SquidEmu, i_dc: f64, out: *mut f64) -> SquidStatus {
    guard(|| {
        let h = handle(h as *mut SquidEmu)?;
        let out = out_ref(out)?;
        *out = h
            .session
            .cfg
            .modulation_voltage(i_dc)
            .or_else(|e| fail(SquidStatus::InvalidArgument, e.to_string()))?;
        Ok(())
    })
}

/// Message for the last failed call on this thread; empty after a success.
/// Valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn squid_emu_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn squid_emu_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}
