use proptest::prelude::*;
use snls_experiments::config::{ExperimentConfig, SeedSource};
use snls_experiments::output::{verify_manifest, Assertion, OutputDir, RunManifest};
use snls_experiments::suite::harmonic_multiset;

const BASE: &str = "kind = \"convexity\"\noutput_dir = \"out\"\n";

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn overrides_land_in_the_config(nu in 0.01f64..10.0, n in 0usize..40, ball in 0.1f64..5.0) {
        let sets = vec![format!("model.friction={nu:e}"), format!("model.cutoff={n}"), format!("model.ball={ball:e}")];
        let (c, _) = ExperimentConfig::assemble(Some(BASE), &sets, None, None).unwrap();
        prop_assert_eq!(c.model.friction, nu);
        prop_assert_eq!(c.model.cutoff, n);
        prop_assert_eq!(c.model.ball, ball);
    }

    #[test]
    fn seed_precedence(flag in proptest::option::of(any::<u64>()), env in proptest::option::of(any::<u64>()), file in proptest::option::of(0u64..i64::MAX as u64)) {
        let text = match file {
            Some(f) => format!("seed = {f}\n{BASE}"),
            None => BASE.to_string(),
        };
        let env_text = env.map(|e| e.to_string());
        let (c, src) = ExperimentConfig::assemble(Some(&text), &[], flag, env_text.as_deref()).unwrap();
        let want = flag.or(env).or(file);
        prop_assert_eq!(c.seed, want);
        let want_src = if flag.is_some() { SeedSource::Flag } else if env.is_some() { SeedSource::Env } else if file.is_some() { SeedSource::File } else { SeedSource::Default };
        prop_assert_eq!(src, want_src);
        if let Some(s) = want {
            prop_assert_eq!(c.convexity.seed, s);
        }
    }

    #[test]
    fn odd_or_small_exponents_are_rejected(p in 0u32..12) {
        let r = ExperimentConfig::assemble(Some(BASE), &[format!("model.exponent={p}")], None, None);
        prop_assert_eq!(r.is_ok(), p >= 4 && p % 2 == 0);
    }

    #[test]
    fn assertion_relations(v in -1e6f64..1e6, b in -1e6f64..1e6) {
        prop_assert_eq!(Assertion::at_most("x", v, b).pass, v <= b);
        prop_assert_eq!(Assertion::at_least("x", v, b).pass, v >= b);
        prop_assert!(!Assertion::at_most("x", f64::NAN, b).pass);
    }

    #[test]
    fn output_names_cannot_escape(name in "[a-z]{1,6}", up in 1usize..3) {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path()).unwrap();
        let escape = format!("{}{name}", "../".repeat(up));
        let absolute = format!("/{name}");
        let plain = format!("{name}.txt");
        prop_assert!(out.write(&escape, b"x").is_err());
        prop_assert!(out.write(&absolute, b"x").is_err());
        prop_assert!(out.write(&plain, b"x").is_ok());
    }

    #[test]
    fn manifest_digests_match_files(contents in proptest::collection::vec(proptest::collection::vec(any::<u8>(), 0..64), 1..4)) {
        let dir = tempfile::tempdir().unwrap();
        let (cfg, src) = ExperimentConfig::assemble(Some(BASE), &[], None, None).unwrap();
        let mut out = OutputDir::create(dir.path()).unwrap();
        for (i, c) in contents.iter().enumerate() {
            out.write(&format!("f{i}.bin"), c).unwrap();
        }
        RunManifest::new(&cfg, src, Vec::new(), "t0".into(), &out, vec![]).unwrap().write(&out).unwrap();
        prop_assert!(verify_manifest(dir.path()).unwrap());
        std::fs::write(dir.path().join("f0.bin"), b"tampered!").unwrap();
        prop_assert!(!verify_manifest(dir.path()).unwrap());
    }
}

#[test]
fn harmonic_multiplicities() {
    assert_eq!(harmonic_multiset(7), vec![0, 1, 1, 2, 2, 2, 3]);
}
