//! CSV emission. Floats use Rust's shortest round-trip formatting, so equal
//! values serialize identically across runs.

use crate::sweep::{AggregateRow, DetailRow};

pub const DETAIL_HEADER: &str = "method,sample_id,true_class,target_class,target_p,converged,\
iterations,time_s,sparsity,indist_score,final_prob,orig_score";

pub const AGGREGATE_HEADER: &str = "method,target_p,n,converged_frac,sparsity_mean,sparsity_std,\
sparsity_ci95,indist_mean,indist_std,indist_ci95,time_mean,time_std,time_ci95,orig_indist_mean";

pub fn detail_csv(rows: &[DetailRow]) -> String {
    let mut out = String::from(DETAIL_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.method,
            r.sample_id,
            r.true_class,
            r.target_class,
            r.target_p,
            r.converged,
            r.iterations,
            r.time_s,
            r.sparsity,
            r.indist_score,
            r.final_prob,
            r.orig_score,
        ));
    }
    out
}

pub fn aggregate_csv(rows: &[AggregateRow]) -> String {
    let mut out = String::from(AGGREGATE_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.method,
            r.target_p,
            r.n,
            r.converged_frac,
            r.sparsity.mean,
            r.sparsity.std,
            r.sparsity.ci_half,
            r.indist.mean,
            r.indist.std,
            r.indist.ci_half,
            r.time.mean,
            r.time.std,
            r.time.ci_half,
            r.orig_indist_mean,
        ));
    }
    out
}
