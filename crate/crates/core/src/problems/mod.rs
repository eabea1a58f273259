//! Objectives with gradient and Hessian-vector oracles.

mod dataset;
mod logistic;
mod quadratic;
mod scalar;

pub use dataset::{load_csv_dataset, DatasetSchema, Normalization};
pub use logistic::{synthetic_blobs, Batch, LogisticRegressionProblem};
pub use quadratic::{make_test_matrix, quadratic_grad, Quadratic};
pub use scalar::{ScalarObjective, ScalarQuadratic, ScalarTestFunction};
