//! Browser bindings: build a noisy sphere, segment it with either model and
//! return per-face colors for drawing.

use surfseg::io::label_colors;
use surfseg::labels::equator_pole_labels;
use surfseg::sweep::{run_model, score, Fixture, Model, SolveSettings};
use wasm_bindgen::prelude::*;

#[wasm_bindgen]
pub struct Demo {
    fixture: Fixture,
    correctness: f64,
    labels_used: usize,
    iterations: usize,
    runtime_s: f64,
}

fn flat_colors(hard: &[usize]) -> Vec<u8> {
    label_colors(hard).into_iter().flatten().collect()
}

#[wasm_bindgen]
impl Demo {
    /// Unit icosphere with `n_equator + 2` equator-and-pole labels and vertex
    /// noise of variance factor `noise`.
    #[wasm_bindgen(constructor)]
    pub fn new(subdivisions: u32, n_equator: usize, noise: f64, seed: u32) -> Result<Demo, String> {
        if subdivisions > 4 {
            return Err("at most 4 subdivisions".into());
        }
        let labels = equator_pole_labels(n_equator).map_err(|e| e.to_string())?;
        let fixture = Fixture::sphere(subdivisions, labels, Some((noise, seed as u64))).map_err(|e| e.to_string())?;
        Ok(Demo { fixture, correctness: f64::NAN, labels_used: 0, iterations: 0, runtime_s: 0.0 })
    }

    #[wasm_bindgen(js_name = triangleCount)]
    pub fn triangle_count(&self) -> usize {
        self.fixture.mesh.num_triangles()
    }

    /// Corner positions, nine floats per triangle.
    pub fn positions(&self) -> Vec<f32> {
        let v = self.fixture.mesh.vertices();
        self.fixture
            .mesh
            .triangles()
            .iter()
            .flat_map(|t| t.iter().flat_map(|&i| [v[i].x as f32, v[i].y as f32, v[i].z as f32]))
            .collect()
    }

    /// Colors of the clean-mesh reference labeling, three bytes per triangle.
    #[wasm_bindgen(js_name = referenceColors)]
    pub fn reference_colors(&self) -> Vec<u8> {
        flat_colors(&self.fixture.reference)
    }

    /// Runs `model` ("atv" or "ltv") at `beta` and returns the face colors
    /// of the hard labeling.
    pub fn segment(&mut self, model: &str, beta: f64, max_iters: usize) -> Result<Vec<u8>, String> {
        let model: Model = model.parse().map_err(|e: surfseg::Error| e.to_string())?;
        let settings = SolveSettings { max_iters: Some(max_iters), ..SolveSettings::default() };
        let run = run_model(model, &self.fixture, beta, &settings).map_err(|e| e.to_string())?;
        let row = score(&self.fixture, &run).map_err(|e| e.to_string())?;
        self.correctness = row.correctness;
        self.labels_used = row.labels_used;
        self.iterations = run.iterations;
        self.runtime_s = run.runtime_s;
        Ok(flat_colors(&run.hard))
    }

    /// Area-weighted agreement of the last segmentation with the reference.
    #[wasm_bindgen(getter)]
    pub fn correctness(&self) -> f64 {
        self.correctness
    }

    #[wasm_bindgen(getter, js_name = labelsUsed)]
    pub fn labels_used(&self) -> usize {
        self.labels_used
    }

    #[wasm_bindgen(getter)]
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    #[wasm_bindgen(getter, js_name = runtimeSeconds)]
    pub fn runtime_s(&self) -> f64 {
        self.runtime_s
    }
}
