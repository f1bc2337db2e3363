//! Front-ends mapping lasso / elastic net, ℓ1-logistic regression and the
//! dual kernel SVM onto [`ProblemSpec`](crate::admm::ProblemSpec).

mod elastic_net;
mod logistic;
mod svm;

pub use elastic_net::{elastic_net_spec, lasso_kkt, ElasticNetProblem, ElasticNetSpec};
pub use logistic::{logistic_spec, logistic_weights, LogisticProblem, LogisticSpec};
pub use svm::{svm_spec, SvmModel, SvmProblem, SvmSpec};
