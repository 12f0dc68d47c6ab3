use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use relaycache_ffi::*;

const CONFIG: &str = include_str!("../../core/configs/links_5db.json");

fn load(json: &str) -> (RcStatus, *mut RcModel) {
    let c = CString::new(json).unwrap();
    let mut m = ptr::null_mut();
    let st = unsafe { rc_model_from_json(c.as_ptr(), &mut m) };
    (st, m)
}

fn last_error() -> Option<String> {
    let p = rc_last_error_message();
    (!p.is_null()).then(|| unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned())
}

struct Model(*mut RcModel);

impl Drop for Model {
    fn drop(&mut self) {
        unsafe { rc_model_free(self.0) }
    }
}

fn model() -> Model {
    let (st, m) = load(CONFIG);
    assert_eq!(st, RcStatus::RcOk);
    assert!(!m.is_null());
    Model(m)
}

#[test]
fn analytic_matches_library() {
    let m = model();
    let mut t = RcThroughput::default();
    assert_eq!(unsafe { rc_model_analytic(m.0, &mut t) }, RcStatus::RcOk);
    assert_eq!(last_error(), None);

    let cfg = relaycache::ExperimentConfig::from_json(CONFIG).unwrap();
    let s = cfg.resolve().unwrap();
    let r = relaycache::throughput::analyze(&s.probs, &s.traffic, s.cache.queue_size)
        .unwrap()
        .report;
    assert_eq!(t.t_direct, r.t_direct);
    assert_eq!(t.t_network, r.t_network);
    assert!((t.t_noncacheable - t.t_direct - t.t_relayed).abs() < 1e-15);
}

#[test]
fn oracle_semantics_are_distinct_but_close() {
    let m = model();
    let (mut a, mut b) = (RcThroughput::default(), RcThroughput::default());
    unsafe {
        assert_eq!(
            rc_model_oracle(m.0, RcSemantics::RcBlocked, &mut a),
            RcStatus::RcOk
        );
        assert_eq!(
            rc_model_oracle(m.0, RcSemantics::RcDataCenter, &mut b),
            RcStatus::RcOk
        );
    }
    // The fallback adds base-station interference while the relay serves D.
    assert_ne!(a, b);
    assert!(b.t_noncacheable < a.t_noncacheable);
    assert!((a.t_network - b.t_network).abs() < 0.01);
}

#[test]
fn simulation_is_seeded() {
    let m = model();
    let run = |seed| {
        let (mut t, mut ci) = (RcThroughput::default(), RcThroughput::default());
        let st = unsafe {
            rc_model_simulate(m.0, RcSemantics::RcBlocked, 200_000, seed, &mut t, &mut ci)
        };
        assert_eq!(st, RcStatus::RcOk, "{:?}", last_error());
        (t, ci)
    };
    let (a, ci) = run(7);
    assert_eq!(a, run(7).0);
    assert_ne!(a, run(8).0);
    assert!(ci.t_network > 0.0 && ci.t_network < 0.01);

    let mut t = RcThroughput::default();
    let st =
        unsafe { rc_model_simulate(m.0, RcSemantics::RcBlocked, 100, 1, &mut t, ptr::null_mut()) };
    assert_eq!(st, RcStatus::RcInvalidConfig);
    assert!(last_error().unwrap().contains("batch"));
}

#[test]
fn steady_state_buffer_protocol() {
    let m = model();
    let mut size = 0usize;
    assert_eq!(
        unsafe { rc_model_queue_size(m.0, &mut size) },
        RcStatus::RcOk
    );
    assert_eq!(size, 5);

    let mut len = 0usize;
    let st = unsafe { rc_model_steady_state(m.0, ptr::null_mut(), 0, &mut len) };
    assert_eq!(st, RcStatus::RcBufferTooSmall);
    assert_eq!(len, 6);

    let mut buf = vec![f64::NAN; 8];
    let st = unsafe { rc_model_steady_state(m.0, buf.as_mut_ptr(), buf.len(), &mut len) };
    assert_eq!(st, RcStatus::RcOk);
    assert_eq!(len, 6);
    assert!((buf[..6].iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(buf[6].is_nan());
}

#[test]
fn success_prob_by_mask() {
    let m = model();
    let mut p = 0.0;
    let u1 = 1 << RcNode::RcU1 as u8;
    let r = 1 << RcNode::RcR as u8;
    unsafe {
        assert_eq!(
            rc_success_prob(m.0, RcNode::RcU1, RcNode::RcD, u1, &mut p),
            RcStatus::RcOk
        );
        assert!((p - 0.042).abs() < 5e-4);
        assert_eq!(
            rc_success_prob(m.0, RcNode::RcU1, RcNode::RcD, u1 | r, &mut p),
            RcStatus::RcOk
        );
        assert!((p - 0.002).abs() < 5e-4);
        assert_eq!(
            rc_success_prob(m.0, RcNode::RcU1, RcNode::RcD, r, &mut p),
            RcStatus::RcInvalidArgument
        );
        assert_eq!(
            rc_success_prob(m.0, RcNode::RcU1, RcNode::RcD, 0x40, &mut p),
            RcStatus::RcInvalidArgument
        );
    }
    assert!(last_error().is_some());
}

#[test]
fn errors_are_reported() {
    let (st, m) = load("{");
    assert_eq!(st, RcStatus::RcInvalidConfig);
    assert!(m.is_null());
    assert!(last_error().unwrap().contains("config"));

    let bad = CONFIG.replacen("\"q1\": 0.4", "\"q1\": 1.4", 1);
    assert_ne!(bad, CONFIG);
    assert_eq!(load(&bad).0, RcStatus::RcInvalidConfig);

    let mut out = ptr::null_mut();
    assert_eq!(
        unsafe { rc_model_from_json(ptr::null(), &mut out) },
        RcStatus::RcNullPointer
    );
    let mut t = RcThroughput::default();
    assert_eq!(
        unsafe { rc_model_analytic(ptr::null(), &mut t) },
        RcStatus::RcNullPointer
    );
    let m = model();
    assert_eq!(
        unsafe { rc_model_analytic(m.0, ptr::null_mut()) },
        RcStatus::RcNullPointer
    );
    unsafe { rc_model_free(ptr::null_mut()) };
}

#[test]
fn error_message_is_thread_local() {
    let _ = load("{");
    assert!(last_error().is_some());
    std::thread::spawn(|| assert_eq!(last_error(), None))
        .join()
        .unwrap();
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = dir.join("include/relaycache.h");
    assert!(header.exists());
    let text = std::fs::read_to_string(&header).unwrap();
    for sym in [
        "rc_model_from_json",
        "rc_model_free",
        "rc_model_analytic",
        "rc_model_oracle",
        "rc_model_simulate",
        "rc_model_steady_state",
        "rc_success_prob",
        "rc_last_error_message",
        "typedef struct RcModel RcModel",
    ] {
        assert!(text.contains(sym), "{sym} missing from header");
    }
    for (compiler, lang) in [("cc", "c"), ("c++", "c++")] {
        let Ok(out) = Command::new(compiler)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang, "-I"])
            .arg(dir.join("include"))
            .arg(dir.join("examples/smoke.c"))
            .output()
        else {
            eprintln!("{compiler} not found; skipping");
            continue;
        };
        assert!(
            out.status.success(),
            "{compiler}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}
