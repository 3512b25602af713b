macro_rules! example {
    ($module:ident, $file:literal, $test:ident) => {
        #[allow(dead_code)]
        #[path = $file]
        mod $module;

        #[test]
        fn $test() {
            $module::run_example().expect(concat!($file, " should run"));
        }
    };
}

example!(degrade_pairs, "../examples/degrade_pairs.rs", degrade_pairs_runs);
example!(train_overfit, "../examples/train_overfit.rs", train_overfit_runs);
example!(super_resolve, "../examples/super_resolve.rs", super_resolve_runs);
example!(quality_metrics, "../examples/quality_metrics.rs", quality_metrics_runs);
example!(ocr_similarity, "../examples/ocr_similarity.rs", ocr_similarity_runs);
example!(gradient_check, "../examples/gradient_check.rs", gradient_check_runs);
example!(model_roundtrip, "../examples/model_roundtrip.rs", model_roundtrip_runs);
example!(cli_pipeline, "../examples/cli_pipeline.rs", cli_pipeline_runs);
