// Copyright 2026 The msgate Developers
// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GateError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("numeric failure in {context}: estimated error {achieved:e} above tolerance {requested:e}")]
    NumericFailure {
        context: &'static str,
        achieved: f64,
        requested: f64,
    },

    #[error("closed form unsupported: {0}")]
    UnsupportedShape(String),

    #[error("gate order {0} is unsupported")]
    UnsupportedOrder(u32),

    #[error("ill-conditioned problem: {0}")]
    IllConditioned(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("fit failed: {0}")]
    Fit(String),
}

impl GateError {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        GateError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = GateError> = std::result::Result<T, E>;
