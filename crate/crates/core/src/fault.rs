//! Deliberate defects used to show that the acceptance checks are not
//! vacuous. Never enabled by the public algorithm entry points.

#[doc(hidden)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    /// Extragradient extrapolates with the wrong sign: z̃ = z + ηF(z).
    EgMidpointSign,
    /// Unadjusted Langevin drops the step factor on the gradient term.
    UlaDropDelta,
}

impl Fault {
    pub fn parse(s: &str) -> Option<Fault> {
        match s {
            "eg-sign" => Some(Fault::EgMidpointSign),
            "ula-delta" => Some(Fault::UlaDropDelta),
            _ => None,
        }
    }
}
