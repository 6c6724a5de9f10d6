//! Per-point quality measures written to experiment tables.

use serde::Serialize;

use crate::optimizer::IterationRecord;
use crate::problems::{FiniteSumProblem, LogisticProblem};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub k: usize,
    /// Component gradient evaluations divided by `N`.
    pub fge: f64,
    /// `R(x) − R*` on the training problem.
    pub train_error: f64,
    /// Mean logistic loss on the test rows without the ℓ2 term; NaN without a test set.
    pub test_loss: f64,
    /// NaN without a test set.
    pub test_acc: f64,
    pub batch_size: usize,
    pub alpha: f64,
    pub halvings: u32,
    pub pair_admitted: bool,
    pub value_evals: u64,
}

pub const CSV_HEADER: &str = "k,fge,train_error,test_loss,test_acc,batch_size,alpha,halvings,pair_admitted,value_evals";

/// `(train_error, test_loss, test_acc)` at `x`. `test` must carry `λ = 0`.
pub fn evaluate_metrics<P: FiniteSumProblem + ?Sized>(
    train: &P,
    test: Option<&LogisticProblem>,
    x: &[f64],
    rstar: f64,
) -> (f64, f64, f64) {
    let train_error = train.full_value(x) - rstar;
    match test {
        Some(t) => (train_error, t.unregularized_loss(x), t.accuracy(x)),
        None => (train_error, f64::NAN, f64::NAN),
    }
}

impl MetricsRow {
    pub fn from_record<P: FiniteSumProblem + ?Sized>(
        rec: &IterationRecord,
        train: &P,
        test: Option<&LogisticProblem>,
        x: &[f64],
        rstar: f64,
    ) -> Self {
        let train_error = if rec.train_loss.is_nan() {
            train.full_value(x) - rstar
        } else {
            rec.train_loss - rstar
        };
        let (_, test_loss, test_acc) = match test {
            Some(t) => evaluate_metrics(train, Some(t), x, rstar),
            None => (0.0, f64::NAN, f64::NAN),
        };
        Self {
            k: rec.k,
            fge: rec.fge,
            train_error,
            test_loss,
            test_acc,
            batch_size: rec.batch_size,
            alpha: rec.alpha,
            halvings: rec.halvings,
            pair_admitted: rec.pair_admitted,
            value_evals: rec.component_value_evals,
        }
    }

    /// Floats carry 17 significant digits so the text round-trips exactly.
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.k,
            fmt17(self.fge),
            fmt17(self.train_error),
            fmt17(self.test_loss),
            fmt17(self.test_acc),
            self.batch_size,
            fmt17(self.alpha),
            self.halvings,
            u8::from(self.pair_admitted),
            self.value_evals
        )
    }
}

pub fn fmt17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}
