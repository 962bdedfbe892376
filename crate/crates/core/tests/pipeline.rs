use lpface::image::write_pgm;
use lpface::par::Exec;
use lpface::pipeline::*;
use lpface::synth::{self, SynthSpec, Variation};
use lpface::{Error, GrayImage};

fn small_spec(subjects: usize, images: usize) -> SynthSpec {
    SynthSpec {
        subjects,
        images_per_subject: images,
        width: 46,
        height: 56,
        variation: Variation {
            max_rotation_deg: 10.0,
            ..Variation::default()
        },
        seed: 3,
    }
}

fn quick_config(mode: Mode) -> PipelineConfig {
    let mut cfg = PipelineConfig {
        mode,
        features: 12,
        hidden1: 10,
        hidden2: 8,
        ..PipelineConfig::default()
    };
    cfg.split.per_class_train = 3;
    cfg.hyper.max_epochs = 300;
    cfg
}

#[test]
fn orl_tree_loads_in_subject_order() {
    let dir = tempfile::tempdir().unwrap();
    let ds = synth::dataset(&SynthSpec {
        width: 20,
        height: 24,
        ..small_spec(3, 4)
    });
    synth::write_orl_tree(&ds, dir.path()).unwrap();

    let loaded = load_orl(dir.path()).unwrap();
    assert_eq!(loaded.len(), 12);
    assert_eq!(loaded.num_classes(), 3);
    assert_eq!(loaded.class_names(), &["s1", "s2", "s3"]);
    assert_eq!(loaded.image_dimensions(), Some((20, 24)));
    for (a, b) in loaded.samples().iter().zip(ds.samples()) {
        assert_eq!(a.label, b.label);
        assert_eq!(a.image, b.image);
    }
}

#[test]
fn missing_orl_image_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let ds = synth::dataset(&SynthSpec {
        width: 12,
        height: 14,
        ..small_spec(8, 3)
    });
    synth::write_orl_tree(&ds, dir.path()).unwrap();
    let gone = dir.path().join("s7").join("3.pgm");
    std::fs::remove_file(&gone).unwrap();

    match load_orl(dir.path()) {
        Err(Error::Ingestion { path, .. }) => assert_eq!(path, gone),
        other => panic!("expected an ingestion error, got {other:?}"),
    }
}

#[test]
fn orl_rejects_mixed_geometry() {
    let dir = tempfile::tempdir().unwrap();
    let ds = synth::dataset(&SynthSpec {
        width: 12,
        height: 14,
        ..small_spec(2, 2)
    });
    synth::write_orl_tree(&ds, dir.path()).unwrap();
    write_pgm(
        dir.path().join("s2").join("1.pgm"),
        &GrayImage::filled(13, 14, 9).unwrap(),
    )
    .unwrap();
    assert!(matches!(load_orl(dir.path()), Err(Error::Ingestion { .. })));
}

#[test]
fn generic_layout_at_thermal_scale() {
    let dir = tempfile::tempdir().unwrap();
    let names: Vec<String> = (0..16).map(|k| format!("subject_{k:02}")).collect();
    for (k, name) in names.iter().enumerate() {
        let sub = dir.path().join(name);
        std::fs::create_dir(&sub).unwrap();
        for j in 0..125 {
            let img = GrayImage::from_fn(10, 8, |x, y| ((x * 7 + y * 3 + k * 11 + j) % 256) as u8)
                .unwrap();
            write_pgm(sub.join(format!("frame{j:03}.pgm")), &img).unwrap();
        }
    }
    std::fs::write(dir.path().join("README.txt"), "not a subject").unwrap();

    let ds = load_generic(dir.path(), (20, 16)).unwrap();
    assert_eq!(ds.len(), 2000);
    assert_eq!(ds.num_classes(), 16);
    assert_eq!(ds.class_counts(), vec![125; 16]);
    assert_eq!(ds.class_names(), names.as_slice());
    assert_eq!(ds.image_dimensions(), Some((20, 16)));

    let (train, test) = split(
        &ds,
        &SplitSpec {
            per_class_train: 100,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!((train.len(), test.len()), (1600, 400));
}

#[test]
fn bundle_round_trip_classifies_identically() {
    let ds = synth::dataset(&small_spec(5, 5));
    for mode in [Mode::Visual, Mode::LogPolar] {
        let cfg = quick_config(mode);
        let (train, test) = split(&ds, &cfg.split).unwrap();
        let bundle = train_pipeline(&train, &cfg).unwrap();

        let file = tempfile::NamedTempFile::new().unwrap();
        save_bundle(&bundle, file.path()).unwrap();
        let loaded = load_bundle(file.path()).unwrap();
        assert_eq!(loaded, bundle);
        for s in test.samples() {
            let (a, sa) = bundle.classify(&s.image).unwrap();
            let (b, sb) = loaded.classify(&s.image).unwrap();
            assert_eq!(a, b);
            assert_eq!(sa, sb);
        }
        assert_eq!(
            evaluate(&loaded, &test, 0.0).unwrap(),
            evaluate(&bundle, &test, 0.0).unwrap()
        );
    }
}

#[test]
fn wrong_geometry_is_rejected() {
    let ds = synth::dataset(&small_spec(3, 4));
    let cfg = quick_config(Mode::LogPolar);
    let (train, _) = split(&ds, &cfg.split).unwrap();
    let bundle = train_pipeline(&train, &cfg).unwrap();
    let other = GrayImage::filled(47, 56, 100).unwrap();
    assert!(matches!(
        bundle.classify(&other),
        Err(Error::InvalidInput(_))
    ));

    let mut wrong = synth::dataset(&SynthSpec {
        width: 40,
        ..small_spec(3, 4)
    });
    let (_, wrong_test) = split(&wrong, &cfg.split).unwrap();
    assert!(evaluate(&bundle, &wrong_test, 0.0).is_err());
    wrong = synth::dataset(&small_spec(4, 4));
    let (_, more_classes) = split(&wrong, &cfg.split).unwrap();
    assert!(evaluate(&bundle, &more_classes, 0.0).is_err());
}

#[test]
fn false_rejection_grows_with_threshold() {
    let ds = synth::dataset(&small_spec(5, 5));
    let cfg = quick_config(Mode::LogPolar);
    let (train, test) = split(&ds, &cfg.split).unwrap();
    let bundle = train_pipeline(&train, &cfg).unwrap();
    let m = evaluate(&bundle, &test, 0.0).unwrap();

    let mut last = m.false_rejection_rate_at(-1.5);
    assert!((last - m.error_rate()).abs() < 1e-12);
    for k in -14..=15 {
        let frr = m.false_rejection_rate_at(k as f64 / 10.0);
        assert!(frr >= last, "threshold {}", k as f64 / 10.0);
        last = frr;
    }
    assert_eq!(last, 100.0);
    assert!((m.false_rejection_rate - m.false_rejection_rate_at(0.0)).abs() < 1e-12);

    let curve_end = m.curve.last().unwrap();
    assert_eq!(curve_end.n_test, test.len());
    assert_eq!(curve_end.recognition_rate, m.recognition_rate);
}

#[test]
fn training_is_reproducible() {
    let ds = synth::dataset(&small_spec(4, 5));
    let cfg = quick_config(Mode::LogPolar);
    let (train, _) = split(&ds, &cfg.split).unwrap();
    let a = train_pipeline_with(&train, &cfg, Exec::Parallel).unwrap();
    let b = train_pipeline_with(&train, &cfg, Exec::Sequential).unwrap();
    let c = train_pipeline(&train, &cfg).unwrap();
    assert_eq!(write_bundle(&a), write_bundle(&b));
    assert_eq!(write_bundle(&a), write_bundle(&c));

    let mut other = cfg;
    other.hyper.seed = 1;
    assert_ne!(train_pipeline(&train, &other).unwrap().network, a.network);
}

#[test]
fn sweep_traces_every_width() {
    let ds = synth::dataset(&small_spec(4, 4));
    let cfg = quick_config(Mode::LogPolar);
    let (train, _) = split(&ds, &cfg.split).unwrap();
    let results = sweep_hidden1(&train, &cfg, &[2, 5, 0], 40).unwrap();
    assert_eq!(results.len(), 3);
    for r in &results[..2] {
        assert_eq!(r.trace.as_ref().unwrap().len(), 41);
    }
    assert!(results[2].trace.is_err());

    let mut csv = Vec::new();
    write_sweep_csv(&results, &mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("hidden1,epoch,total_error\n"));
    assert_eq!(text.lines().count(), 1 + 41 + 41 + 1);
}

#[test]
fn config_file_drives_training() {
    let text = r#"
        mode = "visual"

        [mlp]
        features = 8
        hidden1 = 6
        hidden2 = 5
        max_epochs = 20
        seed = 4

        [split]
        per_class_train = 2
    "#;
    let cfg = PipelineConfig::from_toml_str(text).unwrap();
    let ds = synth::dataset(&small_spec(3, 4));
    let (train, test) = split(&ds, &cfg.split).unwrap();
    assert_eq!((train.len(), test.len()), (6, 6));
    let bundle = train_pipeline(&train, &cfg).unwrap();
    assert_eq!(bundle.mode, Mode::Visual);
    assert_eq!(bundle.network.sizes(), &[8, 6, 5, 3]);
    assert_eq!(bundle.meta.seed, 4);
    assert!(bundle.meta.epochs <= 20);
}

#[test]
fn comparison_csv_lists_both_modes() {
    let ds = synth::dataset(&small_spec(3, 4));
    let mut cfg = quick_config(Mode::Visual);
    cfg.split.per_class_train = 2;
    cfg.hyper.max_epochs = 30;
    let rows = compare_modes(&ds, &cfg, &[0, 1]).unwrap();
    assert_eq!(rows.len(), 4);
    let mut csv = Vec::new();
    write_comparison_csv(&rows, &mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "mode,seed,n_test,recognition_rate,error_rate,false_rejection_rate,published_error_rate,epochs,final_error"
    );
    let published: Vec<&str> = lines.map(|l| l.split(',').nth(6).unwrap()).collect();
    assert!(published.iter().any(|p| p.parse::<f64>().unwrap() == 10.5));
    assert!(published.iter().any(|p| p.parse::<f64>().unwrap() == 2.5));
}
