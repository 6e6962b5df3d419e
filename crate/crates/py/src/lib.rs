//! Python bindings: `import superglass`.

use std::path::PathBuf;

use numpy::{PyArray1, PyArray2, PyArrayMethods, PyReadonlyArray1, PyReadonlyArray2};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;
use pythonize::{depythonize, pythonize};
use serde::de::DeserializeOwned;
use serde::Serialize;

use sg_core::calib::{run_calibration, CalibrationPolicy, FeatureSubject, SceneSubject, SubjectKind, SubjectSimulator};
use sg_core::cue::{CueFilterConfig, IndicatorDebouncer as CoreDebouncer};
use sg_core::device::{CropConfig, CropMode};
use sg_core::engine::RunConfig;
use sg_core::geom::Rect;
use sg_core::image::{FloatImage, GrayImage};
use sg_core::proto::{self, Command, FrameKind, FramePacket, ResultPacket};
use sg_core::session::{self, CurationParams, SessionReader};
use sg_core::synth::{scene_reference_set, ExpressionSpace, SceneConfig, SceneTrainingConfig, SyntheticScene};
use sg_core::vision::{self, EmotionEstimate, FeatureVector, HogParams, LightingParams, LinearModel, ModelKind, RecognizerConfig, TrainConfig};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py, T: Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    pythonize(py, v).map_err(value_err)
}

fn from_py<T: DeserializeOwned + Default>(obj: Option<&Bound<'_, PyAny>>) -> PyResult<T> {
    match obj {
        None => Ok(T::default()),
        Some(o) if o.is_none() => Ok(T::default()),
        Some(o) => depythonize(o).map_err(value_err),
    }
}

fn model_kind(kind: &str) -> PyResult<ModelKind> {
    match kind {
        "logistic" | "logistic_regression" => Ok(ModelKind::LogisticRegression),
        "svm" | "svm_linear" => Ok(ModelKind::SvmLinear),
        other => Err(PyValueError::new_err(format!("unknown model kind `{other}`"))),
    }
}

fn gray_from(arr: PyReadonlyArray2<'_, u8>) -> PyResult<GrayImage> {
    let view = arr.as_array();
    let (h, w) = view.dim();
    GrayImage::from_raw(w as u32, h as u32, view.iter().copied().collect()).ok_or_else(|| value_err("empty image"))
}

fn float_from(arr: PyReadonlyArray2<'_, f64>) -> PyResult<FloatImage> {
    let view = arr.as_array();
    let (h, w) = view.dim();
    FloatImage::from_raw(w as u32, h as u32, view.iter().copied().collect()).ok_or_else(|| value_err("empty image"))
}

fn gray_to<'py>(py: Python<'py>, img: GrayImage) -> PyResult<Bound<'py, PyArray2<u8>>> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    PyArray1::from_vec(py, img.into_raw()).reshape([h, w])
}

fn float_to<'py>(py: Python<'py>, img: &FloatImage) -> PyResult<Bound<'py, PyArray2<f64>>> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    PyArray1::from_slice(py, img.as_slice()).reshape([h, w])
}

fn rect_arg(r: Option<(u32, u32, u32, u32)>) -> Option<Rect> {
    r.map(|(x, y, w, h)| Rect::new(x, y, w, h))
}

/// Linear expression classifier (logistic regression or linear SVM).
#[pyclass(module = "superglass", skip_from_py_object)]
#[derive(Clone)]
struct Model {
    inner: LinearModel,
}

#[pymethods]
impl Model {
    /// Trains on rendered synthetic faces through the full HOG path.
    #[staticmethod]
    #[pyo3(signature = (kind = "logistic", seed = 0, training = None))]
    fn train_scene(py: Python<'_>, kind: &str, seed: u64, training: Option<&Bound<'_, PyAny>>) -> PyResult<Self> {
        let kind = model_kind(kind)?;
        let sc: SceneTrainingConfig = from_py(training)?;
        let tc = TrainConfig { seed, ..TrainConfig::default() };
        let inner = py.detach(|| sg_core::synth::train_scene_model(&sc, kind, &tc)).map_err(value_err)?;
        Ok(Self { inner })
    }

    /// Trains on the benchmark feature space (no image geometry).
    #[staticmethod]
    #[pyo3(signature = (kind = "logistic", space_seed = 1, seed = 1))]
    fn train_benchmark(kind: &str, space_seed: u64, seed: u64) -> PyResult<Self> {
        let inner = ExpressionSpace::benchmark(space_seed)
            .train_model(model_kind(kind)?, 10, 30, seed)
            .map_err(value_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        LinearModel::load(path).map(|inner| Self { inner }).map_err(|e| PyIOError::new_err(e.to_string()))
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        LinearModel::from_json(text).map(|inner| Self { inner }).map_err(value_err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(path).map_err(|e| PyIOError::new_err(e.to_string()))
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(value_err)
    }

    #[getter]
    fn labels(&self) -> Vec<String> {
        self.inner.label_set.names().to_vec()
    }

    #[getter]
    fn neutral_index(&self) -> usize {
        self.inner.label_set.neutral_index()
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    #[getter]
    fn kind(&self) -> &'static str {
        match self.inner.kind {
            ModelKind::LogisticRegression => "logistic_regression",
            ModelKind::SvmLinear => "svm_linear",
        }
    }

    #[getter]
    fn has_geometry(&self) -> bool {
        self.inner.geometry.is_some()
    }

    /// Raw per-label scores for one feature vector.
    fn scores<'py>(&self, py: Python<'py>, features: PyReadonlyArray1<'_, f64>) -> PyResult<Bound<'py, PyArray1<f64>>> {
        let x = features.as_slice()?;
        if x.len() != self.inner.dimension() {
            return Err(value_err(format!("expected {} features, got {}", self.inner.dimension(), x.len())));
        }
        Ok(PyArray1::from_vec(py, self.inner.scores(x)))
    }

    fn __repr__(&self) -> String {
        format!("Model(kind={}, dimension={}, labels={})", self.kind(), self.dimension(), self.inner.label_set.len())
    }
}

/// Per-session recognizer: locate, register, normalize, HOG, predict.
#[pyclass(module = "superglass", unsendable)]
struct Recognizer {
    inner: vision::Recognizer,
}

#[pymethods]
impl Recognizer {
    #[new]
    #[pyo3(signature = (model, config = None))]
    fn new(model: &Model, config: Option<&Bound<'_, PyAny>>) -> PyResult<Self> {
        let cfg: RecognizerConfig = from_py(config)?;
        vision::Recognizer::new(model.inner.clone(), cfg).map(|inner| Self { inner }).map_err(value_err)
    }

    /// Analyzes a greyscale image (uint8, H x W). Returns the estimate as a dict.
    #[pyo3(signature = (image, sequence = 0, timestamp_us = 0))]
    fn analyze<'py>(&mut self, py: Python<'py>, image: PyReadonlyArray2<'_, u8>, sequence: u32, timestamp_us: u64) -> PyResult<Bound<'py, PyAny>> {
        let img = gray_from(image)?;
        let out = self.inner.analyze(&img, sequence, timestamp_us).map_err(value_err)?;
        to_py(py, &out.estimate)
    }

    /// Decodes a frame datagram and analyzes it; the face comes back in source coordinates.
    fn process_datagram<'py>(&mut self, py: Python<'py>, datagram: &[u8]) -> PyResult<Bound<'py, PyAny>> {
        let packet = proto::decode_frame(datagram).map_err(value_err)?;
        let out = self.inner.process(&packet).map_err(value_err)?;
        to_py(py, &out.estimate)
    }

    fn reset_neutral(&mut self) {
        self.inner.reset_neutral();
    }

    /// Number of neutral frames absorbed so far.
    #[getter]
    fn neutral_samples(&self) -> u64 {
        self.inner.neutral().samples_absorbed()
    }
}

/// Sustain, confidence-floor and refractory filter over estimates.
#[pyclass(module = "superglass")]
struct CueFilter {
    inner: sg_core::cue::CueFilter,
}

#[pymethods]
impl CueFilter {
    #[new]
    #[pyo3(signature = (neutral_label, config = None))]
    fn new(neutral_label: usize, config: Option<&Bound<'_, PyAny>>) -> PyResult<Self> {
        let cfg: CueFilterConfig = from_py(config)?;
        Ok(Self { inner: sg_core::cue::CueFilter::new(cfg, neutral_label) })
    }

    /// Feeds one estimate dict; returns the fired cue or None.
    fn step<'py>(&mut self, py: Python<'py>, estimate: &Bound<'_, PyAny>) -> PyResult<Option<Bound<'py, PyAny>>> {
        let e: EmotionEstimate = depythonize(estimate).map_err(value_err)?;
        self.inner.step(&e).map(|c| to_py(py, &c)).transpose()
    }
}

/// Debounced face-present indicator.
#[pyclass(module = "superglass")]
struct IndicatorDebouncer {
    inner: CoreDebouncer,
}

#[pymethods]
impl IndicatorDebouncer {
    #[new]
    #[pyo3(signature = (debounce = 2))]
    fn new(debounce: usize) -> Self {
        Self { inner: CoreDebouncer::new(debounce) }
    }

    #[pyo3(signature = (present, rect = None, at_us = 0))]
    fn step<'py>(&mut self, py: Python<'py>, present: bool, rect: Option<(u32, u32, u32, u32)>, at_us: u64) -> PyResult<Option<Bound<'py, PyAny>>> {
        self.inner.step_presence(present, rect_arg(rect), at_us).map(|e| to_py(py, &e)).transpose()
    }

    #[getter]
    fn face_present(&self) -> bool {
        self.inner.face_present()
    }
}

/// Device-side crop controller.
#[pyclass(module = "superglass")]
struct CropState {
    inner: sg_core::device::CropState,
}

#[pymethods]
impl CropState {
    #[new]
    #[pyo3(signature = (width, height, config = None))]
    fn new(width: u32, height: u32, config: Option<&Bound<'_, PyAny>>) -> PyResult<Self> {
        let cfg: CropConfig = from_py(config)?;
        Ok(Self { inner: sg_core::device::CropState::new(cfg, width, height) })
    }

    /// Feeds one face observation `(x, y, w, h)` or None.
    #[pyo3(signature = (face = None))]
    fn update(&mut self, face: Option<(u32, u32, u32, u32)>) {
        self.inner.update(rect_arg(face));
    }

    #[getter]
    fn mode(&self) -> &'static str {
        match self.inner.mode() {
            CropMode::FullFrame => "full_frame",
            CropMode::FaceCrop => "face_crop",
        }
    }

    #[getter]
    fn active_crop(&self) -> (u32, u32, u32, u32) {
        let r = self.inner.active_crop();
        (r.x, r.y, r.w, r.h)
    }

    #[getter]
    fn crop_center(&self) -> (f64, f64) {
        self.inner.crop_center()
    }

    #[getter]
    fn frames_since_face(&self) -> u32 {
        self.inner.frames_since_face()
    }

    /// Builds the frame datagram the device would send for `image`.
    #[pyo3(signature = (image, sequence = 0, timestamp_us = 0))]
    fn transmit<'py>(&self, py: Python<'py>, image: PyReadonlyArray2<'_, u8>, sequence: u32, timestamp_us: u64) -> PyResult<Bound<'py, PyBytes>> {
        let img = gray_from(image)?;
        let packet = sg_core::device::select_transmission(&self.inner, &img, sg_core::device::LOW_RES, sequence, timestamp_us);
        let bytes = proto::encode_frame(&packet).map_err(value_err)?;
        Ok(PyBytes::new(py, &bytes))
    }
}

/// Encodes a frame datagram from its fields; `kind` is "full" or "crop".
#[pyfunction]
#[pyo3(signature = (kind, sequence, timestamp_us, source_width, source_height, width, height, payload, crop_x = 0, crop_y = 0))]
#[allow(clippy::too_many_arguments)]
fn encode_frame<'py>(
    py: Python<'py>,
    kind: &str,
    sequence: u32,
    timestamp_us: u64,
    source_width: u16,
    source_height: u16,
    width: u16,
    height: u16,
    payload: Vec<u8>,
    crop_x: u16,
    crop_y: u16,
) -> PyResult<Bound<'py, PyBytes>> {
    let kind = match kind {
        "full" => FrameKind::FullFrame,
        "crop" => FrameKind::FaceCrop,
        other => return Err(value_err(format!("unknown frame kind `{other}`"))),
    };
    let p = FramePacket { kind, sequence, timestamp_us, source_width, source_height, width, height, crop_x, crop_y, payload };
    Ok(PyBytes::new(py, &proto::encode_frame(&p).map_err(value_err)?))
}

/// Decodes a frame datagram into a dict; the payload comes back as a uint8 array (H x W).
#[pyfunction]
fn decode_frame<'py>(py: Python<'py>, datagram: &[u8]) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let p = proto::decode_frame(datagram).map_err(value_err)?;
    let d = pyo3::types::PyDict::new(py);
    d.set_item("kind", if p.kind == FrameKind::FullFrame { "full" } else { "crop" })?;
    d.set_item("sequence", p.sequence)?;
    d.set_item("timestamp_us", p.timestamp_us)?;
    d.set_item("source_width", p.source_width)?;
    d.set_item("source_height", p.source_height)?;
    d.set_item("width", p.width)?;
    d.set_item("height", p.height)?;
    d.set_item("crop_x", p.crop_x)?;
    d.set_item("crop_y", p.crop_y)?;
    let img = GrayImage::from_raw(p.width as u32, p.height as u32, p.payload).ok_or_else(|| value_err("empty payload"))?;
    d.set_item("payload", gray_to(py, img)?)?;
    Ok(d)
}

/// Encodes a result datagram. `label` None means no label; `face` is `(x, y, w, h)`.
#[pyfunction]
#[pyo3(signature = (sequence, face = None, label = None, confidence = 0.0, command = "none"))]
fn encode_result<'py>(py: Python<'py>, sequence: u32, face: Option<(u16, u16, u16, u16)>, label: Option<u8>, confidence: f64, command: &str) -> PyResult<Bound<'py, PyBytes>> {
    let command: Command = serde_plain(command)?;
    let (x, y, w, h) = face.unwrap_or_default();
    let p = ResultPacket {
        sequence,
        face_present: face.is_some(),
        face_x: x,
        face_y: y,
        face_w: w,
        face_h: h,
        label: label.unwrap_or(proto::NO_LABEL),
        confidence: proto::confidence_to_fixed(confidence),
        command,
    };
    Ok(PyBytes::new(py, &proto::encode_result(&p).map_err(value_err)?))
}

fn serde_plain<T: DeserializeOwned>(s: &str) -> PyResult<T> {
    T::deserialize(serde::de::value::StrDeserializer::<serde::de::value::Error>::new(s)).map_err(value_err)
}

#[pyfunction]
fn decode_result<'py>(py: Python<'py>, datagram: &[u8]) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let p = proto::decode_result(datagram).map_err(value_err)?;
    let d = pyo3::types::PyDict::new(py);
    d.set_item("sequence", p.sequence)?;
    d.set_item("face", p.face_present.then_some((p.face_x, p.face_y, p.face_w, p.face_h)))?;
    d.set_item("label", (p.label != proto::NO_LABEL).then_some(p.label))?;
    d.set_item("confidence", p.confidence_f64())?;
    d.set_item("command", to_py(py, &p.command)?)?;
    Ok(d)
}

/// HOG descriptor of a float window (H x W).
#[pyfunction]
#[pyo3(signature = (window, params = None))]
fn hog<'py>(py: Python<'py>, window: PyReadonlyArray2<'_, f64>, params: Option<&Bound<'_, PyAny>>) -> PyResult<Bound<'py, PyArray1<f64>>> {
    let p: HogParams = from_py(params)?;
    let f: FeatureVector = vision::hog(&float_from(window)?, &p).map_err(value_err)?;
    Ok(PyArray1::from_vec(py, f.into_inner()))
}

/// Lighting normalization (gamma, difference of Gaussians, contrast equalization).
#[pyfunction]
#[pyo3(signature = (image, params = None))]
fn normalize_lighting<'py>(py: Python<'py>, image: PyReadonlyArray2<'_, f64>, params: Option<&Bound<'_, PyAny>>) -> PyResult<Bound<'py, PyArray2<f64>>> {
    let p: LightingParams = from_py(params)?;
    let out = vision::normalize_lighting(&float_from(image)?, &p).map_err(value_err)?;
    float_to(py, &out)
}

/// Renders one frame of the synthetic scene: `(image, truth)`.
#[pyfunction]
#[pyo3(signature = (timestamp_us, config = None))]
fn render_scene<'py>(py: Python<'py>, timestamp_us: u64, config: Option<&Bound<'_, PyAny>>) -> PyResult<(Bound<'py, PyArray2<u8>>, Bound<'py, PyAny>)> {
    let cfg: SceneConfig = from_py(config)?;
    let (img, truth) = SyntheticScene::new(cfg).render(timestamp_us);
    Ok((gray_to(py, img)?, to_py(py, &truth)?))
}

/// Curates emotional moments from a list of estimate dicts.
#[pyfunction]
#[pyo3(signature = (estimates, labels, neutral_index, params = None, end_us = None))]
fn curate<'py>(
    py: Python<'py>,
    estimates: &Bound<'_, PyAny>,
    labels: Vec<String>,
    neutral_index: usize,
    params: Option<&Bound<'_, PyAny>>,
    end_us: Option<u64>,
) -> PyResult<Bound<'py, PyAny>> {
    let est: Vec<EmotionEstimate> = depythonize(estimates).map_err(value_err)?;
    let labels = proto::LabelSet::new(labels, neutral_index).map_err(value_err)?;
    let params: CurationParams = from_py(params)?;
    to_py(py, &session::curate(&est, &labels, &params, end_us))
}

/// Runs host and device over loopback and returns the metrics report.
#[pyfunction]
#[pyo3(signature = (model, config = None))]
fn run<'py>(py: Python<'py>, model: &Model, config: Option<&Bound<'_, PyAny>>) -> PyResult<Bound<'py, PyAny>> {
    let cfg: RunConfig = from_py(config)?;
    cfg.validate().map_err(value_err)?;
    let m = model.inner.clone();
    let out = py.detach(|| sg_core::engine::run_e2e(&cfg, m)).map_err(value_err)?;
    to_py(py, &out.metrics)
}

/// Calibrates `model` to a simulated subject such as "synthetic:offset".
/// Returns `(calibrated_model, transcript)`.
#[pyfunction]
#[pyo3(signature = (model, subject = "synthetic:ideal", seed = 0, policy = None, labels = None, space_seed = 1))]
fn calibrate<'py>(
    py: Python<'py>,
    model: &Model,
    subject: &str,
    seed: u64,
    policy: Option<&Bound<'_, PyAny>>,
    labels: Option<Vec<String>>,
    space_seed: u64,
) -> PyResult<(Model, Bound<'py, PyAny>)> {
    let kind: SubjectKind = subject.parse().map_err(value_err)?;
    let policy: CalibrationPolicy = from_py(policy)?;
    policy.validate().map_err(value_err)?;
    let base = &model.inner;
    let active: Vec<usize> = match labels {
        None => (0..base.label_set.len()).collect(),
        Some(names) => names
            .iter()
            .map(|n| base.label_set.index_of(n).ok_or_else(|| value_err(format!("unknown label `{n}`"))))
            .collect::<PyResult<_>>()?,
    };
    let reference_seed = seed.wrapping_add(0x5eed);
    let (mut subj, reference): (Box<dyn SubjectSimulator + Send>, _) = if base.geometry.is_some() {
        let training = SceneTrainingConfig { labels: base.label_set.clone(), ..SceneTrainingConfig::default() };
        let reference = scene_reference_set(&training, reference_seed);
        (Box::new(SceneSubject::new(training, kind, seed)), reference)
    } else {
        let space = ExpressionSpace::benchmark(space_seed);
        if base.dimension() != space.dim() || base.label_set != *space.labels() {
            return Err(value_err("feature-space model does not match the benchmark space"));
        }
        let reference = space.reference_set(10, 20, reference_seed);
        (Box::new(FeatureSubject::new(space, kind, seed)), reference)
    };
    let adapt = Default::default();
    let (adapted, transcript) = py
        .detach(|| run_calibration(base, &policy, &adapt, &active, subj.as_mut(), &reference, seed))
        .map_err(value_err)?;
    Ok((Model { inner: adapted }, to_py(py, &transcript)?))
}

/// Reads a recorded session: `{meta, frames, events}`.
#[pyfunction]
fn read_session<'py>(py: Python<'py>, path: PathBuf) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let r = SessionReader::open(&path).map_err(|e| PyIOError::new_err(e.to_string()))?;
    let d = pyo3::types::PyDict::new(py);
    d.set_item("meta", to_py(py, r.meta())?)?;
    d.set_item("frames", r.frames().len())?;
    d.set_item("events", to_py(py, &r.events().map_err(value_err)?)?)?;
    Ok(d)
}

/// Builds the review timeline of a recorded session.
#[pyfunction]
#[pyo3(signature = (path, params = None))]
fn timeline<'py>(py: Python<'py>, path: PathBuf, params: Option<&Bound<'_, PyAny>>) -> PyResult<Bound<'py, PyAny>> {
    let params: CurationParams = from_py(params)?;
    let tl = session::timeline(&path, &params).map_err(value_err)?;
    to_py(py, &tl)
}

#[pymodule]
fn superglass(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Model>()?;
    m.add_class::<Recognizer>()?;
    m.add_class::<CueFilter>()?;
    m.add_class::<IndicatorDebouncer>()?;
    m.add_class::<CropState>()?;
    m.add_function(wrap_pyfunction!(encode_frame, m)?)?;
    m.add_function(wrap_pyfunction!(decode_frame, m)?)?;
    m.add_function(wrap_pyfunction!(encode_result, m)?)?;
    m.add_function(wrap_pyfunction!(decode_result, m)?)?;
    m.add_function(wrap_pyfunction!(hog, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_lighting, m)?)?;
    m.add_function(wrap_pyfunction!(render_scene, m)?)?;
    m.add_function(wrap_pyfunction!(curate, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate, m)?)?;
    m.add_function(wrap_pyfunction!(read_session, m)?)?;
    m.add_function(wrap_pyfunction!(timeline, m)?)?;
    m.add("MAX_DATAGRAM", proto::MAX_DATAGRAM)?;
    m.add("FRAME_HEADER_LEN", proto::FRAME_HEADER_LEN)?;
    m.add("RESULT_LEN", proto::RESULT_LEN)?;
    Ok(())
}
