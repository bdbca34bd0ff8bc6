//! Measurements on a trained network: gradient check, step-size profile,
//! Hessian extremes, entropy profiles, latent sparsity and Wasserstein-1.

mod entropy;
mod gradcheck;
mod hessian;
mod latent;
mod lipschitz;
mod wasserstein;

use std::fmt;
use std::io::Write;

pub use entropy::{
    active_coordinates, cluster_coverage, cluster_entropy_profile, default_radius, entropy_profiles,
    sample_centers, shannon_entropy, shannon_entropy_profile, EntropyRow,
};
pub use gradcheck::{finite_diff_gradient, gradient_check, gradient_check_sampled, max_relative_error};
pub use hessian::{
    dense_hessian, hessian_extreme_eigs, hessian_vector_product, HessianEigs, HessianProbe, DEFAULT_FD_STEP,
    DENSE_MAX_PARAMS,
};
pub use latent::{latent_sparsity_report, LatentReport};
pub use lipschitz::{lipschitz_profile, spectral_norm, DeltaEntry, DENSE_SVD_MAX};
pub use wasserstein::{min_cost_assignment, wasserstein1_exact, MAX_POINTS as W1_MAX_POINTS};

use crate::error::Result;

#[derive(Clone, Debug, PartialEq)]
pub struct W1Value {
    pub label: String,
    pub n: usize,
    pub value: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DiagnosticsReport {
    pub grad_check_max_rel_err: Option<f64>,
    pub delta_profile: Vec<DeltaEntry>,
    pub hessian: Vec<(usize, HessianEigs)>,
    pub entropy: Vec<EntropyRow>,
    pub entropy_radius: Option<f64>,
    pub latent: Option<LatentReport>,
    pub w1: Vec<W1Value>,
}

fn fmt_real(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".to_string()
    } else {
        format!("{v:e}")
    }
}

pub fn write_delta_csv<W: Write>(entries: &[DeltaEntry], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["node", "delta", "flag"])?;
    for e in entries {
        w.write_record([e.node.to_string(), fmt_real(e.delta), u8::from(e.unstable).to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_entropy_csv<W: Write>(rows: &[EntropyRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["node", "H", "E_cluster"])?;
    for r in rows {
        w.write_record([r.node.to_string(), fmt_real(r.shannon), fmt_real(r.cluster)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_hessian_csv<W: Write>(rows: &[(usize, HessianEigs)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iter", "lambda_min", "lambda_max"])?;
    for (iter, e) in rows {
        w.write_record([iter.to_string(), fmt_real(e.min), fmt_real(e.max)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_w1_csv<W: Write>(rows: &[W1Value], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["label", "N", "value"])?;
    for r in rows {
        w.write_record([r.label.clone(), r.n.to_string(), fmt_real(r.value)])?;
    }
    w.flush()?;
    Ok(())
}

impl fmt::Display for DiagnosticsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(e) = self.grad_check_max_rel_err {
            writeln!(f, "gradient check: max relative error {e:.3e}")?;
        }
        if !self.delta_profile.is_empty() {
            let min = self.delta_profile.iter().map(|e| e.delta).fold(f64::INFINITY, f64::min);
            let flagged = self.delta_profile.iter().filter(|e| e.unstable).count();
            writeln!(f, "step-size profile: min delta {}, {flagged} node(s) below dt", fmt_real(min))?;
        }
        for (iter, e) in &self.hessian {
            writeln!(f, "hessian at iter {iter}: lambda_min {:.4e}, lambda_max {:.4e}", e.min, e.max)?;
        }
        if let (Some(first), Some(last)) = (self.entropy.first(), self.entropy.last()) {
            writeln!(
                f,
                "entropy: H {:.4} -> {:.4}, cluster {:.4} -> {:.4} (eps {})",
                first.shannon,
                last.shannon,
                first.cluster,
                last.cluster,
                self.entropy_radius.map_or("-".into(), fmt_real)
            )?;
        }
        if let Some(l) = &self.latent {
            writeln!(
                f,
                "latent at node {}: modal support {} of {} components, consistency {:.3}, union {}",
                l.node,
                l.modal_support.len(),
                l.latent.len(),
                l.consistency,
                l.union_support.len()
            )?;
        }
        for w in &self.w1 {
            writeln!(f, "W1 {} (N = {}): {:.6e}", w.label, w.n, w.value)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_headers_and_sentinel() {
        let mut buf = Vec::new();
        write_delta_csv(
            &[DeltaEntry {
                node: 0,
                lipschitz: 0.0,
                delta: f64::INFINITY,
                unstable: false,
            }],
            &mut buf,
        )
        .unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "node,delta,flag\n0,inf,0\n");

        let mut buf = Vec::new();
        write_entropy_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "node,H,E_cluster\n");
        let mut buf = Vec::new();
        write_hessian_csv(&[(3, HessianEigs { min: -1.0, max: 2.0 })], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "iter,lambda_min,lambda_max\n3,-1e0,2e0\n");
        let mut buf = Vec::new();
        write_w1_csv(
            &[W1Value {
                label: "out".into(),
                n: 4,
                value: 0.5,
            }],
            &mut buf,
        )
        .unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "label,N,value\nout,4,5e-1\n");
    }
}
