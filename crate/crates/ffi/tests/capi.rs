use std::ffi::{c_char, CString};
use std::ptr;

use belpm_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    let n = unsafe { belpm_last_error(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n.min(255)].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

fn henon_rows(n: usize, dim: usize) -> (Vec<f64>, Vec<f64>) {
    let mut s = vec![0.0; n + dim];
    assert_eq!(unsafe { belpm_generate_henon(s.len(), s.as_mut_ptr()) }, BelpmStatus::Ok);
    let mut x = Vec::with_capacity(n * dim);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        x.extend_from_slice(&s[i..i + dim]);
        y.push(s[i + dim]);
    }
    (x, y)
}

const CONFIG: &str = "k_a = 4\nk_o = 6\nepochs = 5\n";

fn train(x: &[f64], y: &[f64], dim: usize) -> *mut BelpmModel {
    let cfg = CString::new(CONFIG).unwrap();
    let mut model = ptr::null_mut();
    let st = unsafe { belpm_model_train(x.as_ptr(), y.as_ptr(), y.len(), dim, cfg.as_ptr(), &mut model) };
    assert_eq!(st, BelpmStatus::Ok, "{}", last_error());
    assert!(!model.is_null());
    model
}

#[test]
fn henon_generator_starts_at_origin() {
    let mut s = [f64::NAN; 4];
    assert_eq!(unsafe { belpm_generate_henon(4, s.as_mut_ptr()) }, BelpmStatus::Ok);
    assert_eq!(s[0], 0.0);
    assert_eq!(s[1], 1.0);
    assert!((s[3] - 1.076).abs() < 1e-12);
}

#[test]
fn train_predict_save_load_round_trip() {
    let dim = 3;
    let (x, y) = henon_rows(240, dim);
    let (train_x, test_x) = x.split_at(200 * dim);
    let model = train(train_x, &y[..200], dim);

    let mut d = 0;
    let mut p = 0;
    unsafe {
        assert_eq!(belpm_model_dim(model, &mut d), BelpmStatus::Ok);
        assert_eq!(belpm_model_parameter_count(model, &mut p), BelpmStatus::Ok);
    }
    assert_eq!((d, p), (dim, 4 + 6 + 8));

    let mut pred = vec![0.0; 40];
    let st = unsafe { belpm_model_predict(model, test_x.as_ptr(), 40, dim, pred.as_mut_ptr()) };
    assert_eq!(st, BelpmStatus::Ok);
    let mut score = 0.0;
    unsafe { assert_eq!(belpm_nmse(pred.as_ptr(), y[200..].as_ptr(), 40, &mut score), BelpmStatus::Ok) };
    assert!(score < 0.1, "nmse {score}");

    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("m.json").to_str().unwrap()).unwrap();
    let mut loaded = ptr::null_mut();
    unsafe {
        assert_eq!(belpm_model_save(model, path.as_ptr()), BelpmStatus::Ok);
        assert_eq!(belpm_model_load(path.as_ptr(), &mut loaded), BelpmStatus::Ok);
    }
    let mut again = vec![0.0; 40];
    unsafe { belpm_model_predict(loaded, test_x.as_ptr(), 40, dim, again.as_mut_ptr()) };
    assert_eq!(pred, again);

    let mut adapted = vec![0.0; 40];
    let st = unsafe { belpm_model_adapt(loaded, test_x.as_ptr(), 40, dim, 1, adapted.as_mut_ptr()) };
    assert_eq!(st, BelpmStatus::Ok);
    assert_eq!(adapted[0], pred[0]);

    unsafe {
        belpm_model_free(model);
        belpm_model_free(loaded);
        belpm_model_free(ptr::null_mut());
    }
}

#[test]
fn wknn_matches_core_regressor() {
    let dim = 2;
    let (x, y) = henon_rows(120, dim);
    let kernel = CString::new("gaussian").unwrap();
    let mut out = vec![0.0; 20];
    let st = unsafe {
        belpm_wknn_predict(x.as_ptr(), y.as_ptr(), 100, dim, 5, kernel.as_ptr(), x[100 * dim..].as_ptr(), 20, out.as_mut_ptr())
    };
    assert_eq!(st, BelpmStatus::Ok, "{}", last_error());

    let rows: Vec<Vec<f64>> = x.chunks(dim).map(<[f64]>::to_vec).collect();
    let ds = belpm_core::EmbeddedDataset::new(rows[..100].to_vec(), y[..100].to_vec(), dim, 1, 1).unwrap();
    let reg = belpm_core::WknnRegressor::with_heuristic_b(ds, 5, belpm_core::Kernel::Gaussian).unwrap();
    assert_eq!(out, reg.predict_all(&rows[100..]).unwrap());
}

#[test]
fn errors_map_to_status_codes() {
    let mut out = 0.0;
    let mut model = ptr::null_mut();
    unsafe {
        assert_eq!(belpm_nmse(ptr::null(), [1.0].as_ptr(), 1, &mut out), BelpmStatus::NullPointer);
        assert!(last_error().contains("predicted"));

        let c = [2.0, 2.0, 2.0];
        assert_eq!(belpm_nmse(c.as_ptr(), c.as_ptr(), 3, &mut out), BelpmStatus::Numeric);

        let bad = CString::new("k_a = 0\n").unwrap();
        let st = belpm_model_train([0.0, 1.0].as_ptr(), [0.0, 1.0].as_ptr(), 2, 1, bad.as_ptr(), &mut model);
        assert_ne!(st, BelpmStatus::Ok);
        assert!(model.is_null());

        let unknown = CString::new("nope = 1\n").unwrap();
        let st = belpm_model_train([0.0, 1.0].as_ptr(), [0.0, 1.0].as_ptr(), 2, 1, unknown.as_ptr(), &mut model);
        assert_eq!(st, BelpmStatus::Config);

        let kernel = CString::new("triangle").unwrap();
        let st = belpm_wknn_predict([0.0].as_ptr(), [0.0].as_ptr(), 1, 1, 1, kernel.as_ptr(), ptr::null(), 0, ptr::null_mut());
        assert_eq!(st, BelpmStatus::InvalidArgument);
        assert!(last_error().contains("triangle"));

        let missing = CString::new("/nonexistent/model.json").unwrap();
        assert_eq!(belpm_model_load(missing.as_ptr(), &mut model), BelpmStatus::Io);

        assert_eq!(belpm_model_predict(ptr::null(), ptr::null(), 0, 1, ptr::null_mut()), BelpmStatus::NullPointer);
        assert_eq!(belpm_mse([1.0, 2.0].as_ptr(), [1.0, 2.0].as_ptr(), 2, &mut out), BelpmStatus::Ok);
        assert_eq!(out, 0.0);
        assert_eq!(last_error(), "");
    }
}

#[test]
fn last_error_truncates_to_buffer() {
    let mut out = 0.0;
    unsafe { belpm_nmse(ptr::null(), ptr::null(), 1, &mut out) };
    let mut small = [0x7f as c_char; 4];
    let full = unsafe { belpm_last_error(small.as_mut_ptr(), small.len()) };
    assert!(full > 3);
    assert_eq!(small[3], 0);
    assert_eq!(unsafe { belpm_last_error(ptr::null_mut(), 0) }, full);
}
