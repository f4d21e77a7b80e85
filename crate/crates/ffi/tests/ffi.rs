use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ttfs_dendrites::data::{encode_ttfs, encode_ttfs_steps};
use ttfs_dendrites::harness::Checkpoint;
use ttfs_dendrites::quant::{quantize_model, quantized_inference};
use ttfs_dendrites::{Network, NetworkConfig};
use ttfs_ffi::*;

fn saved_model(dir: &Path) -> (PathBuf, Network) {
    let mut cfg = NetworkConfig::new(vec![16, 10, 2]);
    cfg.n_tasks = 3;
    let net = Network::init(cfg, true, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    let path = dir.join("model.bin");
    Checkpoint {
        seed: 4,
        mode: None,
        epochs_done: 0,
        network: net.clone(),
        optimizer: None,
        accuracy: Vec::new(),
    }
    .save(&path)
    .unwrap();
    (path, net)
}

fn c(path: &Path) -> CString {
    CString::new(path.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    let p = ttfs_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn predictions_match_the_rust_api() {
    let tmp = tempfile::tempdir().unwrap();
    let (path, net) = saved_model(tmp.path());
    let q_ref = quantize_model(&net).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    unsafe {
        let mut model = ptr::null_mut();
        assert_eq!(ttfs_model_load(c(&path).as_ptr(), &mut model), TtfsStatus::Ok);
        assert_eq!(ttfs_model_input_size(model), 16);
        assert_eq!(ttfs_model_task_count(model), 3);
        let mut q = ptr::null_mut();
        assert_eq!(ttfs_model_quantize(model, &mut q), TtfsStatus::Ok);
        let mut image = ptr::null_mut();
        assert_eq!(ttfs_image_export(q, &mut image), TtfsStatus::Ok);
        assert_eq!(ttfs_image_output_size(image), 2);

        for k in 0..30 {
            let px: Vec<u8> = (0..16).map(|_| rng.random()).collect();
            let task = k % 3;
            let mut class = u32::MAX;
            assert_eq!(ttfs_model_predict(model, px.as_ptr(), px.len(), task, &mut class), TtfsStatus::Ok);
            assert_eq!(class as usize, net.predict(&encode_ttfs(&px, &net.config), task).unwrap());

            let want = quantized_inference(&q_ref, &encode_ttfs_steps(&px, 450), task).unwrap();
            assert_eq!(ttfs_quantized_predict(q, px.as_ptr(), px.len(), task, &mut class), TtfsStatus::Ok);
            assert_eq!(class as usize, want.prediction);

            let mut times = [0i32; 2];
            assert_eq!(
                ttfs_emulate(image, px.as_ptr(), px.len(), task, &mut class, times.as_mut_ptr(), 2),
                TtfsStatus::Ok
            );
            assert_eq!(class as usize, want.prediction);
            let expected: Vec<i32> = want.layers[1].iter().map(|s| s.map_or(-1, i32::from)).collect();
            assert_eq!(times.to_vec(), expected);
        }
        ttfs_image_free(image);
        ttfs_quantized_free(q);
        ttfs_model_free(model);
    }
}

#[test]
fn image_save_and_load() {
    let tmp = tempfile::tempdir().unwrap();
    let (path, _) = saved_model(tmp.path());
    let img_path = tmp.path().join("m.img");
    unsafe {
        let mut model = ptr::null_mut();
        assert_eq!(ttfs_model_load(c(&path).as_ptr(), &mut model), TtfsStatus::Ok);
        let mut q = ptr::null_mut();
        assert_eq!(ttfs_model_quantize(model, &mut q), TtfsStatus::Ok);
        let mut image = ptr::null_mut();
        assert_eq!(ttfs_image_export(q, &mut image), TtfsStatus::Ok);
        assert_eq!(ttfs_image_save(image, c(&img_path).as_ptr()), TtfsStatus::Ok);
        let mut loaded = ptr::null_mut();
        assert_eq!(ttfs_image_load(c(&img_path).as_ptr(), &mut loaded), TtfsStatus::Ok);
        let px = [100u8; 16];
        let (mut a, mut b) = (0u32, 1u32);
        let mut ta = [0i32; 2];
        let mut tb = [0i32; 2];
        assert_eq!(ttfs_emulate(image, px.as_ptr(), 16, 1, &mut a, ta.as_mut_ptr(), 2), TtfsStatus::Ok);
        assert_eq!(ttfs_emulate(loaded, px.as_ptr(), 16, 1, &mut b, tb.as_mut_ptr(), 2), TtfsStatus::Ok);
        assert_eq!((a, ta), (b, tb));
        ttfs_image_free(loaded);
        ttfs_image_free(image);
        ttfs_quantized_free(q);
        ttfs_model_free(model);
    }
}

#[test]
fn errors_are_reported_as_status_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let (path, _) = saved_model(tmp.path());
    unsafe {
        let mut model = ptr::null_mut();
        let missing = c(&tmp.path().join("absent.bin"));
        assert_eq!(ttfs_model_load(missing.as_ptr(), &mut model), TtfsStatus::Io);
        assert!(last_error().contains("absent.bin"));
        assert!(model.is_null());

        assert_eq!(ttfs_model_load(ptr::null(), &mut model), TtfsStatus::NullPointer);

        let garbage = tmp.path().join("garbage.bin");
        std::fs::write(&garbage, b"not a checkpoint at all").unwrap();
        assert_eq!(ttfs_model_load(c(&garbage).as_ptr(), &mut model), TtfsStatus::Format);

        assert_eq!(ttfs_model_load(c(&path).as_ptr(), &mut model), TtfsStatus::Ok);
        let px = [0u8; 15];
        let mut class = 0;
        assert_eq!(ttfs_model_predict(model, px.as_ptr(), 15, 0, &mut class), TtfsStatus::Dimension);
        let px = [0u8; 16];
        assert_eq!(
            ttfs_model_predict(model, px.as_ptr(), 16, 7, &mut class),
            TtfsStatus::InvalidArgument
        );
        assert_eq!(ttfs_model_predict(model, px.as_ptr(), 16, 0, ptr::null_mut()), TtfsStatus::NullPointer);
        assert_eq!(
            ttfs_model_predict(ptr::null(), px.as_ptr(), 16, 0, &mut class),
            TtfsStatus::NullPointer
        );

        let mut q = ptr::null_mut();
        assert_eq!(ttfs_model_quantize(model, &mut q), TtfsStatus::Ok);
        let mut image = ptr::null_mut();
        assert_eq!(ttfs_image_export(q, &mut image), TtfsStatus::Ok);
        let mut short = [0i32; 1];
        assert_eq!(
            ttfs_emulate(image, px.as_ptr(), 16, 0, &mut class, short.as_mut_ptr(), 1),
            TtfsStatus::Dimension
        );
        assert_eq!(ttfs_emulate(image, px.as_ptr(), 16, 0, &mut class, ptr::null_mut(), 0), TtfsStatus::Ok);

        ttfs_image_free(image);
        ttfs_quantized_free(q);
        ttfs_model_free(model);
        ttfs_model_free(ptr::null_mut());
    }
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(ttfs_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/ttfs.h")).unwrap();
    for name in [
        "ttfs_version",
        "ttfs_last_error",
        "ttfs_model_load",
        "ttfs_model_free",
        "ttfs_model_predict",
        "ttfs_model_quantize",
        "ttfs_quantized_predict",
        "ttfs_quantized_free",
        "ttfs_image_export",
        "ttfs_image_load",
        "ttfs_image_save",
        "ttfs_image_free",
        "ttfs_emulate",
        "typedef struct TtfsModel TtfsModel",
        "TTFS_STATUS_DIMENSION = 5",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}

/// Compiles the C smoke program against the header and the static library.
#[test]
fn c_program_links_and_runs() {
    let deps = std::env::current_exe().unwrap();
    let profile_dir = deps.parent().and_then(Path::parent).unwrap();
    // The test binary links the rlib; the archive is only refreshed by a build.
    let mut build = Command::new(std::env::var("CARGO").unwrap_or_else(|_| "cargo".into()));
    build.args(["build", "-q", "-p", "ttfs-ffi", "--lib"]);
    if profile_dir.file_name().is_some_and(|n| n == "release") {
        build.arg("--release");
    }
    assert!(build.status().unwrap().success());
    let lib = profile_dir.join("libttfs_ffi.a");
    let tmp = tempfile::tempdir().unwrap();
    let (ckpt, _) = saved_model(tmp.path());
    let exe = tmp.path().join("smoke");
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let status = Command::new("cc")
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("a C compiler named cc");
    assert!(status.success());
    let out = Command::new(&exe).arg(&ckpt).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with(env!("CARGO_PKG_VERSION")));
}
