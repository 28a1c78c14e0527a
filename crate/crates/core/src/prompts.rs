//! Prompt assembly: problem description cards, serialized optimization
//! history, and task instructions, rendered into fixed templates.
//!
//! The template texts are frozen against golden fixture files (see
//! `fixtures/prompts/`); any wording change must regenerate the goldens
//! through the CLI so the diff is reviewable. Quirks in the wording
//! ("standarizing", "the total amount input's features", double-quoted
//! "None" in the no-context variant but single-quoted elsewhere) are
//! deliberate and must not be cleaned up.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numfmt::format_value;
use crate::space::{Configuration, SearchSpace};
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Classification,
    Regression,
}

impl TaskKind {
    fn label(&self) -> &'static str {
        match self {
            TaskKind::Classification => "classification",
            TaskKind::Regression => "regression",
        }
    }
}

/// Per-dimension line of the "allowable ranges" listing. `type_label` is
/// the rendered type token (the transform name, or "ordinal").
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HyperparamRange {
    pub name: String,
    pub type_label: String,
    pub lower: f64,
    pub upper: f64,
}

/// Describes the model under optimization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelCard {
    pub model_name: String,
    pub task: TaskKind,
    pub metric: String,
    pub hyperparams: Vec<HyperparamRange>,
}

impl ModelCard {
    /// Builds the card from a space, labelling each dimension with its
    /// transform (ordinal dims keep an "ordinal" label).
    pub fn from_space(
        model_name: &str,
        task: TaskKind,
        metric: &str,
        space: &SearchSpace,
    ) -> Self {
        let hyperparams = space
            .dims()
            .iter()
            .map(|d| HyperparamRange {
                name: d.name.clone(),
                type_label: match d.kind {
                    crate::space::ParamKind::Ordinal => "ordinal".to_string(),
                    _ => d.transform.to_string(),
                },
                lower: d.lower,
                upper: d.upper,
            })
            .collect();
        ModelCard {
            model_name: model_name.to_string(),
            task,
            metric: metric.to_string(),
            hyperparams,
        }
    }

    /// The card must list exactly the space's dimensions, in space order,
    /// so anonymized names line up between ranges and history.
    pub fn check_against(&self, space: &SearchSpace) -> Result<()> {
        if self.hyperparams.len() != space.len()
            || self
                .hyperparams
                .iter()
                .zip(space.dims())
                .any(|(h, d)| h.name != d.name)
        {
            return Err(Error::Prompt(
                "model card hyperparameters do not match the search space".into(),
            ));
        }
        Ok(())
    }
}

/// Dataset statistics block of the full-context description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StatSummary {
    pub one_hot_total: usize,
    pub skewness: Vec<f64>,
    pub n_strong_target_corr: usize,
    pub n_pairwise: usize,
    pub n_strong_pairwise: usize,
}

impl StatSummary {
    pub fn render(&self, model_name: &str) -> String {
        let skew = self
            .skewness
            .iter()
            .map(|&s| format_value(s))
            .collect::<Vec<_>>()
            .join(", ");
        format!(
            "Considering one-hot encoding for categorical features the total amount input's \
             features of the {model_name} is {}. We are standarizing numerical values to have \
             mean 0 and std 1. The Skewness of each feature is [{skew}]. The number of features \
             that have strong correlation (defined as > 0.5 or <-0.5) with the target feature \
             is {}. Of the {} pairwise feature relationships, {} pairs of features are strongly \
             correlated (>0.5, <-0.5).",
            self.one_hot_total, self.n_strong_target_corr, self.n_pairwise, self.n_strong_pairwise
        )
    }
}

/// Describes the dataset the model is evaluated on.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DataCard {
    pub n_samples: usize,
    pub n_features: usize,
    pub n_numerical: usize,
    pub n_categorical: usize,
    /// Class fractions; must sum to 1 when present.
    pub class_distribution: Option<Vec<f64>>,
    pub stats: Option<StatSummary>,
}

impl DataCard {
    pub fn validate(&self) -> Result<()> {
        if self.n_numerical + self.n_categorical != self.n_features {
            return Err(Error::Prompt(format!(
                "data card: {} numerical + {} categorical != {} features",
                self.n_numerical, self.n_categorical, self.n_features
            )));
        }
        if let Some(fracs) = &self.class_distribution {
            let total: f64 = fracs.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::Prompt(format!(
                    "data card: class fractions sum to {total}, expected 1"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptPurpose {
    Warmstart,
    DiscSm,
    GenSm,
    Sampler,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    #[default]
    Full,
    /// Strips the dataset sentences from the problem description.
    NoContext,
    /// Strips non-formatting guidance from the sampler instructions;
    /// other purposes keep their full text.
    NoInstructions,
    /// Drops both cards and anonymizes hyperparameter names to X_i.
    Uninformative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextLevel {
    None,
    Partial,
    Full,
}

/// Structured facts about the query carried alongside the rendered text.
/// Transport backends ignore them; deterministic mock responders use them
/// to answer consistently without re-parsing prompt text.
#[derive(Debug, Clone, Default)]
pub struct PromptHints {
    pub query: Option<Configuration>,
    pub target: Option<f64>,
    /// Current best configuration when sampling; lets an informed scripted
    /// responder propose plausible neighbours.
    pub incumbent: Option<Configuration>,
    pub n_expected: usize,
}

#[derive(Debug, Clone)]
pub struct RoleMessage {
    pub role: &'static str,
    pub content: String,
}

#[derive(Debug, Clone)]
pub struct PromptBundle {
    pub text: String,
    /// System-message slot; empty by default, the whole prompt rides in a
    /// single user message.
    pub system: Option<String>,
    pub purpose: PromptPurpose,
    pub ablation: Ablation,
    pub hints: PromptHints,
}

impl PromptBundle {
    pub fn messages(&self) -> Vec<RoleMessage> {
        let mut msgs = Vec::with_capacity(2);
        if let Some(system) = &self.system {
            msgs.push(RoleMessage {
                role: "system",
                content: system.clone(),
            });
        }
        msgs.push(RoleMessage {
            role: "user",
            content: self.text.clone(),
        });
        msgs
    }
}

/// What the prompt asks for, with the per-purpose inputs.
#[derive(Debug, Clone)]
pub enum PromptTask<'a> {
    Warmstart {
        context: ContextLevel,
        n_recommendations: usize,
    },
    DiscPredict {
        query: &'a Configuration,
    },
    GenClassify {
        query: &'a Configuration,
        gamma: f64,
    },
    SampleConfig {
        target: f64,
    },
}

impl PromptTask<'_> {
    pub fn purpose(&self) -> PromptPurpose {
        match self {
            PromptTask::Warmstart { .. } => PromptPurpose::Warmstart,
            PromptTask::DiscPredict { .. } => PromptPurpose::DiscSm,
            PromptTask::GenClassify { .. } => PromptPurpose::GenSm,
            PromptTask::SampleConfig { .. } => PromptPurpose::Sampler,
        }
    }
}

/// Canonical few-shot rendering of the history for the score-prediction
/// prompt, in the given observation order.
pub fn serialize_history(traj: &Trajectory, order: &[usize]) -> Result<String> {
    check_order(order, traj.len())?;
    let lines = history_lines(traj, order, HistoryMode::Performance, false)?;
    Ok(lines.join("\n"))
}

enum HistoryMode<'a> {
    /// "Hyperparameter configuration: …" then "Performance: …".
    Performance,
    /// "Hyperparameter configuration: …" then "Classification: {0|1}".
    Classification(&'a [bool]),
    /// "Performance: …" then "Hyperparameter configuration: …".
    PerformanceFirst,
}

fn check_order(order: &[usize], n: usize) -> Result<()> {
    if order.len() != n {
        return Err(Error::Prompt(format!(
            "history order has {} entries for {n} observations",
            order.len()
        )));
    }
    let mut seen = vec![false; n];
    for &i in order {
        if i >= n || seen[i] {
            return Err(Error::Prompt(format!("history order is not a permutation (index {i})")));
        }
        seen[i] = true;
    }
    Ok(())
}

fn render_config(cfg: &Configuration, space: &SearchSpace, anonymous: bool) -> String {
    space
        .dims()
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let name = dim_label(&d.name, i, anonymous);
            format!("{name} is {}", format_value(cfg.get(&d.name).unwrap_or(f64::NAN)))
        })
        .collect::<Vec<_>>()
        .join(", ")
}

fn dim_label(name: &str, index: usize, anonymous: bool) -> String {
    if anonymous {
        format!("X_{}", index + 1)
    } else {
        name.to_string()
    }
}

fn render_ranges(card: &ModelCard, anonymous: bool) -> String {
    let inner = card
        .hyperparams
        .iter()
        .enumerate()
        .map(|(i, h)| {
            format!(
                "{}: [{}, {}, {}]",
                dim_label(&h.name, i, anonymous),
                h.type_label,
                format_value(h.lower),
                format_value(h.upper)
            )
        })
        .collect::<Vec<_>>()
        .join(", ");
    format!("{{{inner}}}")
}

fn render_class_distribution(fracs: &[f64]) -> String {
    fracs
        .iter()
        .enumerate()
        .map(|(i, f)| format!("class {i}: {}%", format_value(f * 100.0)))
        .collect::<Vec<_>>()
        .join(", ")
}

fn history_lines(
    traj: &Trajectory,
    order: &[usize],
    mode: HistoryMode,
    anonymous: bool,
) -> Result<Vec<String>> {
    let space = traj.space();
    let obs = traj.observations();
    let mut lines = Vec::with_capacity(order.len() * 2);
    for &i in order {
        let cfg_line = format!(
            "Hyperparameter configuration: {}",
            render_config(&obs[i].config, space, anonymous)
        );
        match &mode {
            HistoryMode::Performance => {
                lines.push(cfg_line);
                lines.push(format!("Performance: {}", format_value(obs[i].score)));
            }
            HistoryMode::Classification(labels) => {
                lines.push(cfg_line);
                lines.push(format!("Classification: {}", u8::from(labels[i])));
            }
            HistoryMode::PerformanceFirst => {
                lines.push(format!("Performance: {}", format_value(obs[i].score)));
                lines.push(cfg_line);
            }
        }
    }
    Ok(lines)
}

/// Assembles one prompt. `history_order` permutes the few-shot examples of
/// the ICL purposes (identity when omitted); warmstart ignores it.
pub fn build_prompt(
    model_card: &ModelCard,
    data_card: Option<&DataCard>,
    traj: Option<&Trajectory>,
    task: &PromptTask,
    history_order: Option<&[usize]>,
    ablation: Ablation,
) -> Result<PromptBundle> {
    if let Some(card) = data_card {
        card.validate()?;
    }
    let text = match task {
        PromptTask::Warmstart {
            context,
            n_recommendations,
        } => warmstart_text(model_card, data_card, *context, *n_recommendations, ablation)?,
        _ => {
            let traj = traj.ok_or_else(|| {
                Error::Prompt("in-context prompts require an optimization history".into())
            })?;
            model_card.check_against(traj.space())?;
            if traj.is_empty() {
                return Err(Error::Prompt("in-context prompts require ≥ 1 observation".into()));
            }
            let identity: Vec<usize> = (0..traj.len()).collect();
            let order = history_order.unwrap_or(&identity);
            check_order(order, traj.len())?;
            icl_text(model_card, data_card, traj, task, order, ablation)?
        }
    };
    let hints = match task {
        PromptTask::Warmstart {
            n_recommendations, ..
        } => PromptHints {
            n_expected: *n_recommendations,
            ..Default::default()
        },
        PromptTask::DiscPredict { query } | PromptTask::GenClassify { query, .. } => PromptHints {
            query: Some((*query).clone()),
            n_expected: 1,
            ..Default::default()
        },
        PromptTask::SampleConfig { target } => PromptHints {
            target: Some(*target),
            incumbent: traj.and_then(|t| t.incumbent()).map(|o| o.config.clone()),
            n_expected: 1,
            ..Default::default()
        },
    };
    Ok(PromptBundle {
        text,
        system: None,
        purpose: task.purpose(),
        ablation,
        hints,
    })
}

fn warmstart_text(
    card: &ModelCard,
    data: Option<&DataCard>,
    context: ContextLevel,
    n: usize,
    ablation: Ablation,
) -> Result<String> {
    if n == 0 {
        return Err(Error::Prompt("warmstart needs n_recommendations ≥ 1".into()));
    }
    let anonymous = ablation == Ablation::Uninformative;
    let ranges = render_ranges(card, anonymous);
    let tail = format!(
        "Please suggest {n} diverse yet effective configurations to initiate a Bayesian \
         Optimization process for hyperparameter tuning. You mustn't include {none} in the \
         configurations. Your response should include only a list of dictionaries, where each \
         dictionary describes one recommended configuration. Do not enumerate the dictionaries.",
        none = match context {
            ContextLevel::None => "\"None\"",
            _ => "'None'",
        },
    );
    if anonymous {
        // No problem description at all; names are anonymized.
        return Ok(format!(
            "You are assisting me with automated machine learning. I'm exploring a subset of \
             hyperparameters detailed as: {ranges}. {tail}"
        ));
    }
    match context {
        ContextLevel::None => Ok(format!(
            "You are assisting me with automated machine learning using {model}. I'm exploring \
             a subset of hyperparameters detailed as: {ranges}. {tail}",
            model = card.model_name
        )),
        ContextLevel::Partial | ContextLevel::Full => {
            let data = data.ok_or_else(|| {
                Error::Prompt(
                    "partial/full warmstart context requires a data card \
                     (placeholder `{number of samples}`)"
                        .into(),
                )
            })?;
            let fracs = data.class_distribution.as_deref().ok_or_else(|| {
                Error::Prompt(
                    "partial/full warmstart context requires a class distribution \
                     (placeholder `{class distribution}`)"
                        .into(),
                )
            })?;
            let stat_block = match context {
                ContextLevel::Full => {
                    let stats = data.stats.as_ref().ok_or_else(|| {
                        Error::Prompt(
                            "full warmstart context requires the statistics block \
                             (placeholder `{statistical information}`)"
                                .into(),
                        )
                    })?;
                    format!("{} ", stats.render(&card.model_name))
                }
                _ => String::new(),
            };
            Ok(format!(
                "You are assisting me with automated machine learning using {model} for a \
                 {task} task. The {task} performance is measured using {metric}. The dataset \
                 has {n_samples} samples with {n_features} total features, of which \
                 {n_numerical} are numerical and {n_categorical} are categorical. Class \
                 distribution is {class_dist}. {stat_block}I'm exploring a subset of \
                 hyperparameters detailed as: {ranges}. {tail}",
                model = card.model_name,
                task = card.task.label(),
                metric = card.metric,
                n_samples = data.n_samples,
                n_features = data.n_features,
                n_numerical = data.n_numerical,
                n_categorical = data.n_categorical,
                class_dist = render_class_distribution(fracs),
            ))
        }
    }
}

fn icl_text(
    card: &ModelCard,
    data: Option<&DataCard>,
    traj: &Trajectory,
    task: &PromptTask,
    order: &[usize],
    ablation: Ablation,
) -> Result<String> {
    let anonymous = ablation == Ablation::Uninformative;
    let space = traj.space();

    let opening = if anonymous {
        "The following are examples of the performance of a machine learning model and the \
         corresponding model hyperparameter configurations."
            .to_string()
    } else {
        format!(
            "The following are examples of the performance of a {model} measured in {metric} \
             and the corresponding model hyperparameter configurations.",
            model = card.model_name,
            metric = card.metric
        )
    };

    // Dataset sentences are included only with full context and a data card
    // that has a class distribution to report.
    let dataset = match (ablation, data) {
        (Ablation::Full | Ablation::NoInstructions, Some(d)) => {
            d.class_distribution.as_ref().map(|fracs| {
                format!(
                    " The model is evaluated on a tabular {task} task containing {n_classes} \
                     classes. The tabular dataset contains {n_samples} samples and \
                     {n_features} features ({n_categorical} categorical, {n_numerical} \
                     numerical).",
                    task = card.task.label(),
                    n_classes = fracs.len(),
                    n_samples = d.n_samples,
                    n_features = d.n_features,
                    n_categorical = d.n_categorical,
                    n_numerical = d.n_numerical,
                )
            })
        }
        _ => None,
    }
    .unwrap_or_default();

    let mut lines: Vec<String> = Vec::new();
    match task {
        PromptTask::DiscPredict { query } => {
            lines.push(format!(
                "{opening}{dataset} Your response should only contain the predicted accuracy \
                 in the format ## performance ##."
            ));
            lines.extend(history_lines(traj, order, HistoryMode::Performance, anonymous)?);
            lines.push(format!(
                "Hyperparameter configuration: {}",
                render_config(query, space, anonymous)
            ));
            lines.push("Performance: ".to_string());
        }
        PromptTask::GenClassify { query, gamma } => {
            let split = traj.good_bad(*gamma)?;
            lines.push(format!(
                "{opening}{dataset} The performance classification is 1 if the configuration \
                 is in the best-performing {pct:.1}% of all configurations, and 0 otherwise. \
                 Your response should only contain the predicted performance classification \
                 in the format ## performance classification ##.",
                pct = gamma * 100.0
            ));
            lines.extend(history_lines(
                traj,
                order,
                HistoryMode::Classification(&split.labels),
                anonymous,
            )?);
            lines.push(format!(
                "Hyperparameter configuration: {}",
                render_config(query, space, anonymous)
            ));
            lines.push("Classification: ".to_string());
        }
        PromptTask::SampleConfig { target } => {
            let guidance = match ablation {
                Ablation::NoInstructions => "",
                _ => {
                    "Do not recommend values at the minimum or maximum of allowable range, \
                     do not recommend rounded values. Recommend values with the highest \
                     possible precision, as requested by the allowed ranges. "
                }
            };
            lines.push(format!(
                "{opening}{dataset} The allowable ranges for the hyperparameters are: \
                 {ranges}. Recommend a configuration that can achieve the target performance \
                 of {target}. {guidance}Your response must only contain the predicted \
                 configuration, in the format ## configuration ##.",
                ranges = render_ranges(card, anonymous),
                target = format_value(*target),
            ));
            lines.extend(history_lines(traj, order, HistoryMode::PerformanceFirst, anonymous)?);
            lines.push(format!("Performance: {}", format_value(*target)));
            lines.push("Hyperparameter configuration: ".to_string());
        }
        PromptTask::Warmstart { .. } => unreachable!("handled by warmstart_text"),
    }
    Ok(lines.join("\n"))
}

/// The shared fixture behind the golden prompt files: one model/data card
/// pair, a three-observation trajectory, and one rendering per template.
pub mod golden {
    use super::*;
    use crate::space::bundled;

    pub fn fixture_space() -> SearchSpace {
        bundled::load("bayesmark/random_forest").expect("bundled space")
    }

    pub fn fixture_cards() -> (ModelCard, DataCard) {
        let model = ModelCard::from_space(
            "RandomForest",
            TaskKind::Classification,
            "accuracy",
            &fixture_space(),
        );
        let data = DataCard {
            n_samples: 150,
            n_features: 4,
            n_numerical: 4,
            n_categorical: 0,
            class_distribution: Some(vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]),
            stats: Some(StatSummary {
                one_hot_total: 4,
                skewness: vec![0.31, 0.33, -0.27, -0.1],
                n_strong_target_corr: 3,
                n_pairwise: 6,
                n_strong_pairwise: 2,
            }),
        };
        (model, data)
    }

    pub fn fixture_trajectory() -> Trajectory {
        let space = fixture_space();
        let mut traj = Trajectory::new(space);
        let rows: [(&[f64; 6], f64); 3] = [
            (&[10.0, 0.5, 0.12, 0.03, 0.8, 0.25], 0.142),
            (&[5.0, 0.3, 0.25, 0.15, 0.45, 0.02], 0.078),
            (&[14.0, 0.88, 0.44, 0.33, 0.2, 0.41], 0.196),
        ];
        for (values, score) in rows {
            let cfg: Configuration = traj
                .space()
                .dims()
                .iter()
                .map(|d| d.name.clone())
                .zip(values.iter().copied())
                .collect();
            traj.push(cfg, score).unwrap();
        }
        traj
    }

    fn fixture_query() -> Configuration {
        let space = fixture_space();
        space
            .dims()
            .iter()
            .map(|d| d.name.clone())
            .zip([7.0, 0.42, 0.21, 0.08, 0.65, 0.13])
            .collect()
    }

    /// All golden template renderings, as (file stem, text) pairs.
    pub fn cases() -> Vec<(&'static str, String)> {
        let (model, data) = fixture_cards();
        let traj = fixture_trajectory();
        let query = fixture_query();
        let target = traj.target_value(-0.1).unwrap();

        let warmstart = |context, ablation| {
            build_prompt(
                &model,
                Some(&data),
                None,
                &PromptTask::Warmstart {
                    context,
                    n_recommendations: 5,
                },
                None,
                ablation,
            )
            .unwrap()
            .text
        };
        let icl = |task: &PromptTask, ablation| {
            build_prompt(&model, Some(&data), Some(&traj), task, None, ablation)
                .unwrap()
                .text
        };
        let disc = PromptTask::DiscPredict { query: &query };
        let gen = PromptTask::GenClassify {
            query: &query,
            gamma: 0.25,
        };
        let sampler = PromptTask::SampleConfig { target };

        vec![
            ("warmstart_none", warmstart(ContextLevel::None, Ablation::Full)),
            ("warmstart_partial", warmstart(ContextLevel::Partial, Ablation::Full)),
            ("warmstart_full", warmstart(ContextLevel::Full, Ablation::Full)),
            (
                "stat_block",
                data.stats.as_ref().unwrap().render(&model.model_name),
            ),
            ("disc", icl(&disc, Ablation::Full)),
            ("gen", icl(&gen, Ablation::Full)),
            ("sampler", icl(&sampler, Ablation::Full)),
            ("disc_uninformative", icl(&disc, Ablation::Uninformative)),
            ("disc_no_context", icl(&disc, Ablation::NoContext)),
            ("sampler_no_context", icl(&sampler, Ablation::NoContext)),
            ("sampler_no_instructions", icl(&sampler, Ablation::NoInstructions)),
        ]
    }
}
