use std::fs;

use esmlr::emaps::{build_emaps, ApSpec};
use esmlr::esmlr::{predict, train, FeatureMode, KernelInput, LorsalConfig, PipelineSpec, RidgeConfig, TrainInput, TrainedModel, Variant};
use esmlr::evaluation::{confusion, oa};
use esmlr::feature_maps::ActivationKind;
use esmlr::hsi_data::{
    flatten_labeled, load_cube, load_ground_truth, normalize_unit_max, select_columns, split_per_class, SplitMode,
    SplitSpec,
};
use esmlr::synthetic::{generate_scene, write_scene, SceneSpec};

fn spec(variant: Variant, mode: FeatureMode) -> PipelineSpec {
    PipelineSpec {
        variant,
        mode,
        activation: ActivationKind::Sigmoid,
        hidden: 120,
        map_seed: 5,
        sigma: 0.5,
        ridge: RidgeConfig::from_exponent(10),
        lorsal: LorsalConfig::from_exponent(-10),
        kernel_input: KernelInput::Raw,
    }
}

#[test]
fn files_to_model_and_back() {
    let dir = tempfile::tempdir().unwrap();
    let scene = generate_scene(&SceneSpec { height: 24, width: 24, bands: 12, noise: 0.05, ..SceneSpec::default() }).unwrap();
    let (cube_path, gt_path) = write_scene(&scene, dir.path(), "scene").unwrap();

    let cube = normalize_unit_max(load_cube(&cube_path).unwrap()).unwrap();
    let gt = load_ground_truth(&gt_path).unwrap();
    assert_eq!(gt, scene.ground_truth);
    let ds = flatten_labeled(&cube, &gt).unwrap();
    let stack = build_emaps(&cube, &ApSpec { thresholds: vec![10, 40], ..ApSpec::default() }, 0.99).unwrap();
    let spatial = stack.feature_block(&ds.pixel_index).h;
    let inputs = TrainInput { spectral: Some(&ds.features), spatial: Some(&spatial) };

    let split = split_per_class(&ds, &SplitSpec { mode: SplitMode::PerClass(8), seed: 3, cap_rule: true }).unwrap();
    let y_train: Vec<usize> = split.train_idx.iter().map(|&j| ds.labels[j]).collect();
    let y_test: Vec<usize> = split.test_idx.iter().map(|&j| ds.labels[j]).collect();

    let mut mapped = spec(Variant::KEsmlr, FeatureMode::Emaps);
    mapped.kernel_input = KernelInput::Mapped;
    let cases = [
        spec(Variant::Esmlr, FeatureMode::Mfl),
        spec(Variant::Smlr, FeatureMode::Mfl),
        spec(Variant::KSmlr, FeatureMode::Spectral),
        mapped,
    ];
    for case in cases {
        let x = inputs.assemble(case.mode).unwrap();
        let model = train(&case, &select_columns(&x, &split.train_idx), &y_train, ds.class_count).unwrap();
        let x_test = select_columns(&x, &split.test_idx);
        let pred = predict(&model, &x_test).unwrap();
        let acc = oa(&confusion(&y_test, &pred, ds.class_count).unwrap()).unwrap();
        assert!(acc > 0.9, "{:?}/{:?}: OA {acc}", case.variant, case.mode);

        let path = dir.path().join("model.json");
        model.save(&path).unwrap();
        let back = TrainedModel::load(&path).unwrap();
        assert_eq!(predict(&back, &x_test).unwrap(), pred);
        assert_eq!(back.scores(&x_test).unwrap(), model.scores(&x_test).unwrap());
    }
}

#[test]
fn csv_ground_truth_matches_raster() {
    let dir = tempfile::tempdir().unwrap();
    let scene = generate_scene(&SceneSpec { height: 6, width: 5, bands: 3, ..SceneSpec::default() }).unwrap();
    let (_, gt_path) = write_scene(&scene, dir.path(), "s").unwrap();
    let mut csv = String::from("row,col,label\n");
    for r in 0..6 {
        for c in 0..5 {
            csv.push_str(&format!("{r},{c},{}\n", scene.ground_truth.label(r, c)));
        }
    }
    let csv_path = dir.path().join("s.csv");
    fs::write(&csv_path, csv).unwrap();
    fs::copy(gt_path.with_extension("json"), csv_path.with_extension("json")).unwrap();
    assert_eq!(load_ground_truth(&csv_path).unwrap(), scene.ground_truth);
}
