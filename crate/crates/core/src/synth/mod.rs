//! Synthetic stand-ins for cameras, faces and subjects: a renderer for
//! expressive elliptical faces, a scripted moving scene with exact ground
//! truth, a feature-space expression model for subject simulation, and
//! training-set generation through the real recognition path.

mod face;
mod features;
mod scene;
mod training;

pub use face::{render_face, Expression, FaceStyle};
pub use features::{ExpressionSpace, SubjectProfile};
pub use scene::{SceneConfig, SceneTruth, ScriptSegment, SyntheticScene, Trajectory};
pub use training::{scene_descriptor, scene_reference_set, scene_training_set, train_scene_model, SceneTrainingConfig};
