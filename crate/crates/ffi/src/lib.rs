//! C ABI over `bnselect`.
//!
//! Datasets live behind an opaque [`BnsDataset`] handle. Every call returns a
//! [`BnsStatus`]; on failure [`bns_last_error`] describes what went wrong.
//! Strings handed out by the library must be released with
//! [`bns_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use bnselect::dataset::CsvOptions;
use bnselect::formats;
use bnselect::scoring::global_log_marginal;
use bnselect::verify::{self, VerifyOptions};
use bnselect::{learn, CategoricalDataset, DirichletPrior, Error, LearnConfig, LossSpec};

/// Status codes. The first four match the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BnsStatus {
    Ok = 0,
    VerifyFailed = 1,
    Validation = 2,
    Capacity = 3,
    NullPointer = 4,
    InvalidUtf8 = 5,
    Panic = 6,
}

/// How Dirichlet cell hyperparameters are set.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BnsPriorScheme {
    /// `value` is the total precision, spread evenly over cells.
    Uniform = 0,
    /// `value` is used for every cell.
    FixedCell = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct BnsPrior {
    pub scheme: BnsPriorScheme,
    pub value: f64,
}

impl BnsPrior {
    fn resolve(self) -> DirichletPrior {
        match self.scheme {
            BnsPriorScheme::Uniform => DirichletPrior::uniform(self.value),
            BnsPriorScheme::FixedCell => DirichletPrior::fixed_cell(self.value),
        }
    }
}

/// Opaque handle to a loaded dataset.
pub struct BnsDataset {
    inner: CategoricalDataset,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(BnsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e.exit_code() {
            3 => BnsStatus::Capacity,
            _ => BnsStatus::Validation,
        };
        Failure(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<BnsStatus, Failure>) -> BnsStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(status)) => status,
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            BnsStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(BnsStatus::NullPointer, format!("`{name}` is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        Failure(
            BnsStatus::InvalidUtf8,
            format!("`{name}` is not valid UTF-8"),
        )
    })
}

unsafe fn dataset_arg<'a>(p: *const BnsDataset) -> Result<&'a CategoricalDataset, Failure> {
    p.as_ref()
        .map(|d| &d.inner)
        .ok_or_else(|| Failure(BnsStatus::NullPointer, "`dataset` is null".into()))
}

fn out_arg<T>(p: *mut T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure(BnsStatus::NullPointer, format!("`{name}` is null")))
    } else {
        Ok(())
    }
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s).expect("JSON has no nul bytes").into_raw()
}

fn store_dataset(d: CategoricalDataset, out: *mut *mut BnsDataset) -> BnsStatus {
    // SAFETY: checked non-null by the caller
    unsafe { *out = Box::into_raw(Box::new(BnsDataset { inner: d })) };
    BnsStatus::Ok
}

/// Parses CSV text. `has_header` is nonzero when the first row names the variables.
///
/// # Safety
/// `csv` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bns_dataset_from_csv(
    csv: *const c_char,
    has_header: c_int,
    out: *mut *mut BnsDataset,
) -> BnsStatus {
    guard(|| {
        out_arg(out, "out")?;
        let text = str_arg(csv, "csv")?;
        let d = CategoricalDataset::load_csv(
            text.as_bytes(),
            CsvOptions {
                has_header: has_header != 0,
            },
        )?;
        Ok(store_dataset(d, out))
    })
}

/// Reads a CSV file.
///
/// # Safety
/// `path` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bns_dataset_from_path(
    path: *const c_char,
    has_header: c_int,
    out: *mut *mut BnsDataset,
) -> BnsStatus {
    guard(|| {
        out_arg(out, "out")?;
        let path = str_arg(path, "path")?;
        let file = std::fs::File::open(path)
            .map_err(|e| Failure(BnsStatus::Validation, format!("{path}: {e}")))?;
        let d = CategoricalDataset::load_csv(
            file,
            CsvOptions {
                has_header: has_header != 0,
            },
        )
        .map_err(|e| {
            let Failure(s, m) = Failure::from(e);
            Failure(s, format!("{path}: {m}"))
        })?;
        Ok(store_dataset(d, out))
    })
}

/// Releases a dataset. Null is ignored.
///
/// # Safety
/// `dataset` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn bns_dataset_free(dataset: *mut BnsDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Number of variables, or 0 for a null handle.
///
/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bns_dataset_num_variables(dataset: *const BnsDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.inner.num_variables())
}

/// Number of cases, or 0 for a null handle.
///
/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bns_dataset_num_cases(dataset: *const BnsDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.inner.n())
}

/// Learns a DAG and writes it as JSON (`{"variable": ["parent", ...]}`) to `dag_json_out`.
///
/// `ordering` is a comma-separated list of every variable name. `loss_json`
/// is a loss spec document; null selects 0-1 loss. `cap` of 0 keeps the
/// default candidate-parent cap.
///
/// # Safety
/// String arguments must be null or nul-terminated; `dataset` must be live;
/// `dag_json_out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bns_learn(
    dataset: *const BnsDataset,
    ordering: *const c_char,
    loss_json: *const c_char,
    prior: BnsPrior,
    cap: usize,
    dag_json_out: *mut *mut c_char,
) -> BnsStatus {
    guard(|| {
        out_arg(dag_json_out, "dag_json_out")?;
        let data = dataset_arg(dataset)?;
        let names: Vec<&str> = data.variables().iter().map(|v| v.name()).collect();
        let ordering = formats::parse_ordering(str_arg(ordering, "ordering")?, &names)?;
        let spec = if loss_json.is_null() {
            LossSpec::ZeroOne
        } else {
            LossSpec::from_json(str_arg(loss_json, "loss_json")?)?
        };
        let mut config = LearnConfig::new(ordering, spec.resolve(data)?);
        config.prior = prior.resolve();
        if cap > 0 {
            config.cap = cap;
        }
        let outcome = learn(data, &config)?;
        let json = formats::dag_to_json(&outcome.dag, &names).to_string();
        *dag_json_out = into_c_string(json);
        Ok(BnsStatus::Ok)
    })
}

/// Log marginal likelihood of a JSON DAG.
///
/// # Safety
/// `dag_json` must be nul-terminated; `dataset` live; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn bns_score(
    dataset: *const BnsDataset,
    dag_json: *const c_char,
    prior: BnsPrior,
    out: *mut f64,
) -> BnsStatus {
    guard(|| {
        out_arg(out, "out")?;
        let data = dataset_arg(dataset)?;
        let names: Vec<&str> = data.variables().iter().map(|v| v.name()).collect();
        let dag = formats::dag_from_json(str_arg(dag_json, "dag_json")?, &names)?;
        let prior = prior.resolve();
        prior.validate()?;
        *out = global_log_marginal(data, &dag, &prior)?;
        Ok(BnsStatus::Ok)
    })
}

/// Runs the oracle equivalence suites; `failures_out` receives the number of
/// failed trials. Returns `VerifyFailed` when it is nonzero.
///
/// # Safety
/// `failures_out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bns_verify(
    trials: usize,
    seed: u64,
    failures_out: *mut usize,
) -> BnsStatus {
    guard(|| {
        out_arg(failures_out, "failures_out")?;
        let report = verify::run(&VerifyOptions {
            trials,
            seed,
            ..VerifyOptions::default()
        });
        let failed: usize = report.suites.iter().map(|s| s.failed()).sum();
        *failures_out = failed;
        if failed == 0 {
            Ok(BnsStatus::Ok)
        } else {
            Err(Failure(
                BnsStatus::VerifyFailed,
                format!("{failed} verification trials failed"),
            ))
        }
    })
}

/// Message for the last failed call on this thread, or null. Valid until
/// the next library call on the same thread.
#[no_mangle]
pub extern "C" fn bns_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by the library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn bns_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
