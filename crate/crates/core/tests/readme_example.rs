use habdf_core::{make_pipeline, BoundingBox, FusionConfig, ModelParams};

#[test]
fn library_example_runs() -> habdf_core::Result<()> {
    let mut pipe = make_pipeline(3, &ModelParams::default(), FusionConfig::uniform(3))?;
    let frame = pipe.step_boxes(&[
        Some(BoundingBox::new(100.0, 80.0, 40.0, 30.0)?),
        Some(BoundingBox::new(101.0, 79.0, 41.0, 30.0)?),
        None,
    ])?;
    let est = frame.fused.expect("initialized from the present boxes");
    let b = est.bbox()?;
    assert!((b.u - 100.5).abs() < 1e-9 && (b.v - 79.5).abs() < 1e-9);
    Ok(())
}
