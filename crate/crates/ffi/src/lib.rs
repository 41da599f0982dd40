//! C ABI over `eva-core`.
//!
//! Every function returns an [`EvaStatus`]; on failure the message is kept in
//! a thread-local buffer readable through [`eva_last_error_message`].
//! Matrices are row-major `double` arrays. Objects are opaque handles that
//! must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use eva_core::alloc::{redistribute_ranks, Measure};
use eva_core::io::{read_checkpoint, EvaCheckpoint, FormatError};
use eva_core::linalg::{svd_truncated, Matrix};
use eva_core::svdstream::{check_convergence, ConvergenceScope, SvdState, UpdateOptions};
use eva_core::{explained_variance_ratio, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NonFinite = 4,
    Numeric = 5,
    InvalidState = 6,
    BufferTooSmall = 7,
    Io = 8,
    FormatBadMagic = 20,
    FormatVersion = 21,
    FormatTruncated = 22,
    FormatCrc = 23,
    FormatMalformed = 24,
    Panic = 99,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

struct Failure(EvaStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidArgument(_) | Error::Config(_) | Error::UnknownLayer(_) | Error::EmptyTap(_) => {
                EvaStatus::InvalidArgument
            }
            Error::DimensionMismatch(_) => EvaStatus::DimensionMismatch,
            Error::NonFinite(_) => EvaStatus::NonFinite,
            Error::Numeric(_) => EvaStatus::Numeric,
            Error::InvalidState(_) => EvaStatus::InvalidState,
            Error::Io(_) => EvaStatus::Io,
            Error::Format(f) => match f {
                FormatError::BadMagic { .. } => EvaStatus::FormatBadMagic,
                FormatError::VersionMismatch { .. } => EvaStatus::FormatVersion,
                FormatError::Truncated { .. } => EvaStatus::FormatTruncated,
                FormatError::Crc { .. } => EvaStatus::FormatCrc,
                FormatError::Malformed(_) => EvaStatus::FormatMalformed,
            },
        };
        Failure(status, e.to_string())
    }
}

fn fail<T>(status: EvaStatus, msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure(status, msg.into()))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> EvaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            EvaStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            EvaStatus::Panic
        }
    }
}

unsafe fn slice<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return fail(EvaStatus::NullPointer, format!("{what} is null"));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn slice_mut<'a>(p: *mut f64, n: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if n == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return fail(EvaStatus::NullPointer, format!("{what} is null"));
    }
    Ok(std::slice::from_raw_parts_mut(p, n))
}

unsafe fn write_out<T>(p: *mut T, v: T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        return fail(EvaStatus::NullPointer, format!("{what} is null"));
    }
    *p = v;
    Ok(())
}

unsafe fn matrix(p: *const f64, rows: usize, cols: usize) -> Result<Matrix, Failure> {
    let n = rows
        .checked_mul(cols)
        .ok_or_else(|| Failure(EvaStatus::InvalidArgument, "matrix size overflows".into()))?;
    Ok(Matrix::new(rows, cols, slice(p, n, "matrix")?.to_vec())?)
}

fn measure(tag: u8) -> Result<Measure, Failure> {
    Measure::from_tag(tag)
        .ok_or_else(|| Failure(EvaStatus::InvalidArgument, format!("unknown measure tag {tag}")))
}

/// Copies the calling thread's last error message into `buf` as a
/// NUL-terminated string, truncating if needed. Returns the full message
/// length in bytes, excluding the terminator.
///
/// # Safety
/// `buf` must be null or valid for `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn eva_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = msg.len().min(cap - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Leading `k` singular triplets of the `rows × cols` matrix `x`.
/// Writes `k` values to `sigma`, `k × cols` to `vt` and, if `u` is not null,
/// `rows × k` to `u`.
///
/// # Safety
/// Pointers must be valid for the sizes above.
#[no_mangle]
pub unsafe extern "C" fn eva_svd_truncated(
    x: *const f64,
    rows: usize,
    cols: usize,
    k: usize,
    sigma: *mut f64,
    vt: *mut f64,
    u: *mut f64,
) -> EvaStatus {
    guard(|| {
        let svd = svd_truncated(&matrix(x, rows, cols)?, k)?;
        slice_mut(sigma, svd.sigma.len(), "sigma")?.copy_from_slice(&svd.sigma);
        slice_mut(vt, svd.vt.as_slice().len(), "vt")?.copy_from_slice(svd.vt.as_slice());
        if !u.is_null() {
            slice_mut(u, svd.u.as_slice().len(), "u")?.copy_from_slice(svd.u.as_slice());
        }
        Ok(())
    })
}

/// Per-component explained-variance scores. `measure`: 0 = eva, 1 = raw,
/// 2 = max.
///
/// # Safety
/// `sigma` and `out` must be valid for `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn eva_explained_variance(
    sigma: *const f64,
    n: usize,
    m_samples: usize,
    measure_tag: u8,
    out: *mut f64,
) -> EvaStatus {
    guard(|| {
        let xi = explained_variance_ratio(slice(sigma, n, "sigma")?, m_samples, measure(measure_tag)?)?;
        slice_mut(out, n, "out")?.copy_from_slice(&xi);
        Ok(())
    })
}

/// Global rank redistribution. Layer `i` has `sigma_lens[i]` singular values
/// at `sigmas[i]` computed from `samples[i]` rows. Writes one rank per layer
/// to `ranks_out`, in input order.
///
/// # Safety
/// All arrays must hold `n_layers` entries and each `sigmas[i]` must be
/// valid for `sigma_lens[i]` doubles.
#[no_mangle]
pub unsafe extern "C" fn eva_redistribute(
    sigmas: *const *const f64,
    sigma_lens: *const usize,
    samples: *const usize,
    n_layers: usize,
    rank: usize,
    rho: f64,
    measure_tag: u8,
    ranks_out: *mut usize,
) -> EvaStatus {
    guard(|| {
        if n_layers == 0 {
            return fail(EvaStatus::InvalidArgument, "no layers");
        }
        if sigmas.is_null() || sigma_lens.is_null() || samples.is_null() || ranks_out.is_null() {
            return fail(EvaStatus::NullPointer, "null array argument");
        }
        let ptrs = std::slice::from_raw_parts(sigmas, n_layers);
        let lens = std::slice::from_raw_parts(sigma_lens, n_layers);
        let counts = std::slice::from_raw_parts(samples, n_layers);
        // zero-padded names keep BTreeMap order equal to input order
        let name = |i: usize| format!("{i:020}");
        let mut states = std::collections::BTreeMap::new();
        for i in 0..n_layers {
            let sigma = slice(ptrs[i], lens[i], "sigma")?.to_vec();
            let mut st = SvdState::new(name(i), lens[i], lens[i]);
            st.v = Matrix::zeros(lens[i], lens[i]);
            st.sigma = sigma;
            st.samples_seen = counts[i];
            states.insert(name(i), st);
        }
        let alloc = redistribute_ranks(&states, rank, rho, measure(measure_tag)?)?;
        let out = std::slice::from_raw_parts_mut(ranks_out, n_layers);
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = alloc.ranks[&name(i)];
        }
        Ok(())
    })
}

/// Streaming SVD state for one layer.
pub struct EvaSvdStream {
    state: SvdState,
}

/// Creates a stream over `dim` features tracking `tracked` components.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn eva_stream_new(dim: usize, tracked: usize, out: *mut *mut EvaSvdStream) -> EvaStatus {
    guard(|| {
        if dim == 0 || tracked == 0 {
            return fail(EvaStatus::InvalidArgument, "dim and tracked must be >= 1");
        }
        let handle = Box::into_raw(Box::new(EvaSvdStream {
            state: SvdState::new("stream", dim, tracked),
        }));
        if let Err(e) = write_out(out, handle, "out") {
            drop(Box::from_raw(handle));
            return Err(e);
        }
        Ok(())
    })
}

/// # Safety
/// `stream` must come from [`eva_stream_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn eva_stream_free(stream: *mut EvaSvdStream) {
    if !stream.is_null() {
        drop(Box::from_raw(stream));
    }
}

unsafe fn stream_ref<'a>(s: *const EvaSvdStream) -> Result<&'a EvaSvdStream, Failure> {
    s.as_ref()
        .ok_or_else(|| Failure(EvaStatus::NullPointer, "stream is null".into()))
}

/// Folds a `rows × dim` batch into the stream.
///
/// # Safety
/// `stream` must be live; `x` valid for `rows * dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn eva_stream_update(stream: *mut EvaSvdStream, x: *const f64, rows: usize) -> EvaStatus {
    guard(|| {
        let s = stream
            .as_mut()
            .ok_or_else(|| Failure(EvaStatus::NullPointer, "stream is null".into()))?;
        let batch = matrix(x, rows, s.state.dim())?;
        s.state = s.state.update(&batch, &UpdateOptions::default())?;
        Ok(())
    })
}

/// Number of components currently held (at most the tracked count).
///
/// # Safety
/// `stream` must be live; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn eva_stream_components(stream: *const EvaSvdStream, out: *mut usize) -> EvaStatus {
    guard(|| write_out(out, stream_ref(stream)?.state.sigma.len(), "out"))
}

/// Rows consumed so far.
///
/// # Safety
/// `stream` must be live; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn eva_stream_samples_seen(stream: *const EvaSvdStream, out: *mut usize) -> EvaStatus {
    guard(|| write_out(out, stream_ref(stream)?.state.samples_seen, "out"))
}

/// Copies the singular values; `cap` must be at least the component count.
///
/// # Safety
/// `stream` must be live; `out` valid for `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn eva_stream_sigma(stream: *const EvaSvdStream, out: *mut f64, cap: usize) -> EvaStatus {
    guard(|| {
        let sigma = &stream_ref(stream)?.state.sigma;
        if cap < sigma.len() {
            return fail(EvaStatus::BufferTooSmall, format!("need {} values", sigma.len()));
        }
        slice_mut(out, sigma.len(), "out")?.copy_from_slice(sigma);
        Ok(())
    })
}

/// Copies the right-singular vectors (components × dim, row-major).
///
/// # Safety
/// `stream` must be live; `out` valid for `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn eva_stream_vectors(stream: *const EvaSvdStream, out: *mut f64, cap: usize) -> EvaStatus {
    guard(|| {
        let v = stream_ref(stream)?.state.v.as_slice();
        if cap < v.len() {
            return fail(EvaStatus::BufferTooSmall, format!("need {} values", v.len()));
        }
        slice_mut(out, v.len(), "out")?.copy_from_slice(v);
        Ok(())
    })
}

/// Whether every held component moved by less than `tau` (|cos|) in the
/// last update. Needs at least two updates.
///
/// # Safety
/// `stream` must be live; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn eva_stream_converged(stream: *const EvaSvdStream, tau: f64, out: *mut bool) -> EvaStatus {
    guard(|| {
        let st = &stream_ref(stream)?.state;
        let done = check_convergence(st, tau, ConvergenceScope::AllTracked, st.tracked)?;
        write_out(out, done, "out")
    })
}

/// Read-only view of a checkpoint file.
pub struct EvaCheckpointReader {
    ckpt: EvaCheckpoint,
}

/// Opens and validates a checkpoint (magic, version, length, CRC).
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn eva_checkpoint_open(path: *const c_char, out: *mut *mut EvaCheckpointReader) -> EvaStatus {
    guard(|| {
        if path.is_null() {
            return fail(EvaStatus::NullPointer, "path is null");
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Failure(EvaStatus::InvalidArgument, "path is not UTF-8".into()))?;
        let ckpt = read_checkpoint(Path::new(path))?;
        let handle = Box::into_raw(Box::new(EvaCheckpointReader { ckpt }));
        if let Err(e) = write_out(out, handle, "out") {
            drop(Box::from_raw(handle));
            return Err(e);
        }
        Ok(())
    })
}

/// # Safety
/// `reader` must come from [`eva_checkpoint_open`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn eva_checkpoint_free(reader: *mut EvaCheckpointReader) {
    if !reader.is_null() {
        drop(Box::from_raw(reader));
    }
}

unsafe fn layer<'a>(
    reader: *const EvaCheckpointReader,
    index: usize,
) -> Result<&'a eva_core::io::CheckpointLayer, Failure> {
    let r = reader
        .as_ref()
        .ok_or_else(|| Failure(EvaStatus::NullPointer, "reader is null".into()))?;
    r.ckpt.layers.get(index).ok_or_else(|| {
        Failure(
            EvaStatus::InvalidArgument,
            format!("layer {index} out of range ({} layers)", r.ckpt.layers.len()),
        )
    })
}

/// Layer count and `alpha`.
///
/// # Safety
/// `reader` must be live; outputs valid.
#[no_mangle]
pub unsafe extern "C" fn eva_checkpoint_info(
    reader: *const EvaCheckpointReader,
    layers: *mut usize,
    alpha: *mut f64,
) -> EvaStatus {
    guard(|| {
        let r = reader
            .as_ref()
            .ok_or_else(|| Failure(EvaStatus::NullPointer, "reader is null".into()))?;
        write_out(layers, r.ckpt.layers.len(), "layers")?;
        write_out(alpha, r.ckpt.alpha, "alpha")
    })
}

/// Rank and host shape of layer `index`.
///
/// # Safety
/// `reader` must be live; outputs valid.
#[no_mangle]
pub unsafe extern "C" fn eva_checkpoint_layer(
    reader: *const EvaCheckpointReader,
    index: usize,
    rank: *mut usize,
    in_features: *mut usize,
    out_features: *mut usize,
) -> EvaStatus {
    guard(|| {
        let l = layer(reader, index)?;
        write_out(rank, l.rank, "rank")?;
        write_out(in_features, l.in_features, "in_features")?;
        write_out(out_features, l.out_features, "out_features")
    })
}

/// Copies the layer name, NUL-terminated, into `buf`.
///
/// # Safety
/// `reader` must be live; `buf` valid for `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn eva_checkpoint_layer_name(
    reader: *const EvaCheckpointReader,
    index: usize,
    buf: *mut c_char,
    cap: usize,
) -> EvaStatus {
    guard(|| {
        let name = &layer(reader, index)?.name;
        if buf.is_null() {
            return fail(EvaStatus::NullPointer, "buf is null");
        }
        if cap <= name.len() {
            return fail(EvaStatus::BufferTooSmall, format!("need {} bytes", name.len() + 1));
        }
        ptr::copy_nonoverlapping(name.as_ptr().cast::<c_char>(), buf, name.len());
        *buf.add(name.len()) = 0;
        Ok(())
    })
}

/// Copies `A` (rank × in) and `B` (out × rank) of layer `index`.
///
/// # Safety
/// `reader` must be live; `a` and `b` valid for their sizes.
#[no_mangle]
pub unsafe extern "C" fn eva_checkpoint_layer_weights(
    reader: *const EvaCheckpointReader,
    index: usize,
    a: *mut f64,
    a_cap: usize,
    b: *mut f64,
    b_cap: usize,
) -> EvaStatus {
    guard(|| {
        let l = layer(reader, index)?;
        let (sa, sb) = (l.a.as_slice(), l.b.as_slice());
        if a_cap < sa.len() || b_cap < sb.len() {
            return fail(
                EvaStatus::BufferTooSmall,
                format!("need {} and {} values", sa.len(), sb.len()),
            );
        }
        slice_mut(a, sa.len(), "a")?.copy_from_slice(sa);
        slice_mut(b, sb.len(), "b")?.copy_from_slice(sb);
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panics_become_status_codes() {
        let status = guard(|| panic!("boom"));
        assert_eq!(status, EvaStatus::Panic);
        let mut buf = [0 as c_char; 64];
        let n = unsafe { eva_last_error_message(buf.as_mut_ptr(), buf.len()) };
        let msg = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap();
        assert_eq!(n, msg.len());
        assert!(msg.contains("boom"));
    }

    #[test]
    fn success_clears_the_message() {
        set_error("old".into());
        assert_eq!(guard(|| Ok(())), EvaStatus::Ok);
        assert_eq!(unsafe { eva_last_error_message(ptr::null_mut(), 0) }, 0);
    }
}
