//! Exit codes: 1 domain error, 2 usage error, 3 numeric failure.

use hilbert16::bounds::BoundsError;
use hilbert16::implicit_curve::CurveError;
use hilbert16::ode_oracle::OracleError;
use hilbert16::solver2d::SolverError;
use hilbert16::variational::VariationalError;
use hilbert16::PolyError;
use thiserror::Error;

pub const DOMAIN: i32 = 1;
pub const USAGE: i32 = 2;
pub const NUMERIC: i32 = 3;

#[derive(Debug, Error)]
pub enum Failure {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Domain(String),
    #[error("{0}")]
    Numeric(String),
}

fn variational(e: &VariationalError) -> i32 {
    use VariationalError::*;
    match e {
        TooFewSamples(_) | OddSampleCount(_) | NonFiniteSample(_) | SizeMismatch { .. } | BadEpsilon(_)
        | TooManyEigenvalues { .. } => USAGE,
        IrregularPath { .. } | WrongWinding(_) => DOMAIN,
        WindingBroken { .. } | NonFinite(_) | NotCritical { .. } => NUMERIC,
    }
}

fn code_of(e: &(dyn std::error::Error + 'static)) -> Option<i32> {
    if let Some(f) = e.downcast_ref::<Failure>() {
        return Some(match f {
            Failure::Usage(_) => USAGE,
            Failure::Domain(_) => DOMAIN,
            Failure::Numeric(_) => NUMERIC,
        });
    }
    if let Some(b) = e.downcast_ref::<BoundsError>() {
        return Some(match b {
            BoundsError::InvalidDegree(_) => USAGE,
            BoundsError::NonInteger(_) | BoundsError::Overflow => NUMERIC,
            _ => DOMAIN,
        });
    }
    if let Some(c) = e.downcast_ref::<CurveError>() {
        return Some(match c {
            CurveError::GridTooSmall(_) | CurveError::BadTolerance(_) => USAGE,
            CurveError::SolverInconclusive { .. } => NUMERIC,
            _ => DOMAIN,
        });
    }
    if let Some(s) = e.downcast_ref::<SolverError>() {
        return Some(match s {
            SolverError::BadTolerance(_) => USAGE,
            _ => DOMAIN,
        });
    }
    if let Some(o) = e.downcast_ref::<OracleError>() {
        return Some(match o {
            OracleError::BadStep(_) | OracleError::BadTime(_) | OracleError::BadSection => USAGE,
            OracleError::Blowup { .. } | OracleError::NoReturn(_) | OracleError::NotConverged { .. } => NUMERIC,
            OracleError::Path(v) => variational(v),
            _ => DOMAIN,
        });
    }
    if let Some(v) = e.downcast_ref::<VariationalError>() {
        return Some(variational(v));
    }
    if e.downcast_ref::<PolyError>().is_some()
        || e.downcast_ref::<std::io::Error>().is_some()
        || e.downcast_ref::<serde_json::Error>().is_some()
        || e.downcast_ref::<csv::Error>().is_some()
    {
        return Some(USAGE);
    }
    None
}

pub fn exit_code(err: &anyhow::Error) -> i32 {
    err.chain().find_map(code_of).unwrap_or(DOMAIN)
}
