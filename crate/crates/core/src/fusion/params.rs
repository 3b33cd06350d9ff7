use candle_core::Var;
use serde::{Deserialize, Serialize};

/// Learning-rate group of a parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamGroup {
    /// Carried over from the vision-only model; fine-tuned at the low rate.
    Pretrained,
    /// Added by the radar extension; trained at the high rate.
    New,
}

/// A named handle to a model variable. Cloning shares storage.
#[derive(Clone)]
pub struct NamedParam {
    pub name: String,
    pub var: Var,
    pub group: ParamGroup,
}

impl NamedParam {
    pub fn numel(&self) -> usize {
        self.var.elem_count()
    }
}

/// Splits parameters into (pretrained, new).
pub fn param_groups(model: &super::FusionModel) -> (Vec<NamedParam>, Vec<NamedParam>) {
    model
        .params()
        .into_iter()
        .partition(|p| p.group == ParamGroup::Pretrained)
}
