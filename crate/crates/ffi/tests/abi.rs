use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use pkg_balance_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> Option<String> {
    let p = pkgb_last_error();
    (!p.is_null()).then(|| unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned())
}

unsafe fn router(
    workers: usize,
    sources: usize,
    partitioner: &str,
    estimation: Option<&str>,
) -> *mut PkgbRouter {
    let p = c(partitioner);
    let e = estimation.map(c);
    let mut out = ptr::null_mut();
    let st = pkgb_router_new(
        workers,
        sources,
        2,
        42,
        p.as_ptr(),
        e.as_ref().map_or(ptr::null(), |e| e.as_ptr()),
        ptr::null(),
        &mut out,
    );
    assert_eq!(st, PkgbStatus::Ok, "{:?}", last_error());
    assert!(!out.is_null());
    out
}

#[test]
fn routes_and_reports_loads() {
    unsafe {
        let r = router(4, 2, "pkg", Some("local"));
        let mut workers = 0;
        assert_eq!(pkgb_router_workers(r, &mut workers), PkgbStatus::Ok);
        assert_eq!(workers, 4);
        for i in 0..1000u64 {
            let (mut s, mut w) = (usize::MAX, usize::MAX);
            assert_eq!(pkgb_router_route(r, i % 17, &mut s, &mut w), PkgbStatus::Ok);
            assert_eq!(s, (i % 2) as usize);
            assert!(w < 4);
        }
        let mut loads = [0u64; 4];
        assert_eq!(
            pkgb_router_loads(r, loads.as_mut_ptr(), loads.len()),
            PkgbStatus::Ok
        );
        assert_eq!(loads.iter().sum::<u64>(), 1000);
        let mut imb = -1.0;
        assert_eq!(pkgb_router_imbalance(r, &mut imb), PkgbStatus::Ok);
        let max = *loads.iter().max().unwrap() as f64;
        assert!((imb - (max - 250.0)).abs() < 1e-12);
        assert!(last_error().is_none());
        pkgb_router_free(r);
    }
}

#[test]
fn shuffle_grouping_round_robins_per_source() {
    unsafe {
        let r = router(3, 1, "sg", None);
        let mut seen = Vec::new();
        for _ in 0..6 {
            let mut w = 0;
            assert_eq!(pkgb_router_route_from(r, 0, 7, &mut w), PkgbStatus::Ok);
            seen.push(w);
        }
        assert_eq!(seen, [0, 1, 2, 0, 1, 2]);
        assert_eq!(
            pkgb_router_route_from(r, 1, 7, ptr::null_mut()),
            PkgbStatus::InvalidArgument
        );
        assert!(last_error().unwrap().contains("source 1"));
        pkgb_router_free(r);
    }
}

#[test]
fn rejects_bad_arguments() {
    unsafe {
        let mut out = ptr::null_mut();
        let kg = c("kg");
        let local = c("local");
        assert_eq!(
            pkgb_router_new(
                4,
                1,
                2,
                0,
                kg.as_ptr(),
                local.as_ptr(),
                ptr::null(),
                &mut out
            ),
            PkgbStatus::InvalidArgument
        );
        assert!(out.is_null());
        assert!(last_error().is_some());
        let bogus = c("roundrobin");
        assert_eq!(
            pkgb_router_new(
                4,
                1,
                2,
                0,
                bogus.as_ptr(),
                ptr::null(),
                ptr::null(),
                &mut out
            ),
            PkgbStatus::InvalidArgument
        );
        assert_eq!(
            pkgb_router_new(0, 1, 2, 0, kg.as_ptr(), ptr::null(), ptr::null(), &mut out),
            PkgbStatus::InvalidArgument
        );
        let off = c("offgreedy");
        assert_eq!(
            pkgb_router_new(4, 1, 2, 0, off.as_ptr(), ptr::null(), ptr::null(), &mut out),
            PkgbStatus::InvalidArgument
        );
        assert_eq!(
            pkgb_router_new(4, 1, 2, 0, ptr::null(), ptr::null(), ptr::null(), &mut out),
            PkgbStatus::NullPointer
        );
        assert_eq!(
            pkgb_router_new(
                4,
                1,
                2,
                0,
                kg.as_ptr(),
                ptr::null(),
                ptr::null(),
                ptr::null_mut()
            ),
            PkgbStatus::NullPointer
        );
        let invalid_utf8 = [0xffu8 as c_char, 0];
        assert_eq!(
            pkgb_router_new(
                4,
                1,
                2,
                0,
                invalid_utf8.as_ptr(),
                ptr::null(),
                ptr::null(),
                &mut out
            ),
            PkgbStatus::InvalidArgument
        );
        assert_eq!(
            pkgb_router_route(ptr::null_mut(), 1, ptr::null_mut(), ptr::null_mut()),
            PkgbStatus::NullPointer
        );
        pkgb_router_free(ptr::null_mut());

        let r = router(5, 1, "kg", None);
        let mut small = [0u64; 2];
        assert_eq!(
            pkgb_router_loads(r, small.as_mut_ptr(), 2),
            PkgbStatus::InvalidArgument
        );
        pkgb_router_free(r);
    }
}

#[test]
fn imbalance_of_counters() {
    unsafe {
        let mut out = 0.0;
        let loads = [3u64, 1, 2];
        assert_eq!(pkgb_imbalance(loads.as_ptr(), 3, &mut out), PkgbStatus::Ok);
        assert_eq!(out, 1.0);
        assert_eq!(
            pkgb_imbalance(loads.as_ptr(), 0, &mut out),
            PkgbStatus::InvalidArgument
        );
        assert_eq!(
            pkgb_imbalance(ptr::null(), 3, &mut out),
            PkgbStatus::NullPointer
        );
    }
}

#[test]
fn simulate_matches_library_run() {
    let spec = "zipf:1.1,1000,20000";
    let mut summary = PkgbSummary::default();
    let (w, p, e) = (c(spec), c("pkg"), c("global"));
    let st = unsafe {
        pkgb_simulate(
            w.as_ptr(),
            8,
            2,
            2,
            3,
            p.as_ptr(),
            e.as_ptr(),
            ptr::null(),
            &mut summary,
        )
    };
    assert_eq!(st, PkgbStatus::Ok, "{:?}", last_error());

    let workload =
        pkg_balance::Workload::load(pkg_balance::WorkloadSpec::parse(spec, 3).unwrap()).unwrap();
    let config = pkg_balance::RunConfig::new(8, 2).with_seed(3);
    let plan = pkg_balance::RoutingPlan::pkg(pkg_balance::Estimation::Global);
    let r = pkg_balance::run(&config, &plan, &workload, false).unwrap();
    assert_eq!(summary.messages, 20_000);
    assert_eq!(summary.avg_imbalance, r.avg_imbalance);
    assert_eq!(summary.normalized_avg, r.normalized_avg);
    assert_eq!(summary.final_imbalance, r.final_imbalance());
    assert_eq!(summary.max_load, r.final_loads.max());

    let bad = c("zipf:1.1,0,10");
    let st = unsafe {
        pkgb_simulate(
            bad.as_ptr(),
            8,
            2,
            2,
            3,
            p.as_ptr(),
            ptr::null(),
            ptr::null(),
            &mut summary,
        )
    };
    assert_eq!(st, PkgbStatus::InvalidArgument);
}

#[test]
fn version_is_package_version() {
    let v = unsafe { CStr::from_ptr(pkgb_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/pkg_balance.h")
}

#[test]
fn header_declares_every_entry_point() {
    let h = std::fs::read_to_string(header()).unwrap();
    for sym in [
        "pkgb_last_error",
        "pkgb_version",
        "pkgb_router_new",
        "pkgb_router_free",
        "pkgb_router_route",
        "pkgb_router_route_from",
        "pkgb_router_workers",
        "pkgb_router_loads",
        "pkgb_router_imbalance",
        "pkgb_imbalance",
        "pkgb_simulate",
        "typedef struct PkgbRouter PkgbRouter;",
        "PKGB_STATUS_OK = 0",
        "PKGB_STATUS_PANIC = 4",
    ] {
        assert!(h.contains(sym), "header lacks {sym}");
    }
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include "pkg_balance.h"

int main(void) {
    PkgbRouter *r = NULL;
    if (pkgb_router_new(4, 1, 2, 7, "pkg", "global", NULL, &r) != PKGB_STATUS_OK) return 1;
    for (uint64_t i = 0; i < 400; i++) {
        size_t w;
        if (pkgb_router_route(r, i % 5, NULL, &w) != PKGB_STATUS_OK || w >= 4) return 2;
    }
    uint64_t loads[4];
    if (pkgb_router_loads(r, loads, 4) != PKGB_STATUS_OK) return 3;
    if (loads[0] + loads[1] + loads[2] + loads[3] != 400) return 4;
    pkgb_router_free(r);
    if (pkgb_router_new(0, 1, 2, 7, "kg", NULL, NULL, &r) != PKGB_STATUS_INVALID_ARGUMENT) return 5;
    if (pkgb_last_error() == NULL) return 6;
    PkgbSummary s;
    if (pkgb_simulate("uniform:10,1000", 3, 1, 2, 1, "sg", NULL, NULL, &s) != PKGB_STATUS_OK) return 7;
    printf("%llu %.1f\n", (unsigned long long)s.messages, s.final_imbalance);
    return 0;
}
"#;

#[test]
fn c_program_links_against_static_library() {
    let Some(cc) = ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok())
    else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let profile_dir = std::env::current_exe()
        .unwrap()
        .parent()
        .unwrap()
        .parent()
        .unwrap()
        .to_path_buf();
    let lib = profile_dir.join("libpkg_balance_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built; skipping", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    let exe = dir.path().join("main");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let status = Command::new(cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "1000 0.7\n");
}
