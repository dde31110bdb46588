//! Fixed registry of the result each report row checks.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(into = "&'static str")]
pub enum Anchor {
    GFunction,
    ExpectationAxioms,
    ConditionalProperties,
    DynamicConsistency,
    LimitExtension,
    Representation,
    ForcedValue,
    ConditionalPsi,
    ZeroMean,
    IsometryBound,
    IsometryEquality,
    SquaredIncrement,
    QvBound,
    MomentBounds,
    IntegralMartingale,
    PathContinuity,
    NormExample,
    StoppedIntegral,
    GridStopping,
    ItoFormula,
    Localization,
}

impl Anchor {
    pub const ALL: [Self; 21] = [
        Self::GFunction,
        Self::ExpectationAxioms,
        Self::ConditionalProperties,
        Self::DynamicConsistency,
        Self::LimitExtension,
        Self::Representation,
        Self::ForcedValue,
        Self::ConditionalPsi,
        Self::ZeroMean,
        Self::IsometryBound,
        Self::IsometryEquality,
        Self::SquaredIncrement,
        Self::QvBound,
        Self::MomentBounds,
        Self::IntegralMartingale,
        Self::PathContinuity,
        Self::NormExample,
        Self::StoppedIntegral,
        Self::GridStopping,
        Self::ItoFormula,
        Self::Localization,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Self::GFunction => "G function",
            Self::ExpectationAxioms => "sublinear expectation axioms",
            Self::ConditionalProperties => "conditional expectation properties",
            Self::DynamicConsistency => "dynamic consistency",
            Self::LimitExtension => "conditional expectation by limits",
            Self::Representation => "supremum over controls",
            Self::ForcedValue => "forced value of squared increments",
            Self::ConditionalPsi => "conditional psi function",
            Self::ZeroMean => "Ito integral zero mean",
            Self::IsometryBound => "Ito isometry upper bound",
            Self::IsometryEquality => "Ito isometry in quadratic variation",
            Self::SquaredIncrement => "squared increment identity",
            Self::QvBound => "quadratic variation integral bound",
            Self::MomentBounds => "conditional moment bounds",
            Self::IntegralMartingale => "conditional mean of Ito integrals",
            Self::PathContinuity => "continuity of integral paths",
            Self::NormExample => "M^p norm",
            Self::StoppedIntegral => "stopped Ito integral",
            Self::GridStopping => "grid approximation of stopping times",
            Self::ItoFormula => "Ito formula",
            Self::Localization => "localization by stopping times",
        }
    }

    pub fn parse(label: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.label() == label)
    }
}

impl From<Anchor> for &'static str {
    fn from(a: Anchor) -> Self {
        a.label()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_round_trip_and_are_unique() {
        for a in Anchor::ALL {
            assert_eq!(Anchor::parse(a.label()), Some(a));
        }
        let mut labels: Vec<_> = Anchor::ALL.iter().map(|a| a.label()).collect();
        labels.sort();
        labels.dedup();
        assert_eq!(labels.len(), Anchor::ALL.len());
    }
}
