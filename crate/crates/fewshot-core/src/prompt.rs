//! Instruction assembly: task definitions and the Post/Question/Answer
//! prompt template, including the component-ablation variants.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::Post;
use crate::select::ShotSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Binary,
    Multiclass,
}

/// A classification task: its definition question, ordered class labels,
/// and the answer token scored for each class.
///
/// For binary tasks the first listed class is the positive class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub name: String,
    pub definition: String,
    pub classes: Vec<String>,
    pub answer_tokens: BTreeMap<String, String>,
    pub kind: TaskKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PromptError {
    EmptyQuery { id: String },
    UnknownShotLabel { label: String },
    InvalidTask(String),
}

impl fmt::Display for PromptError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PromptError::EmptyQuery { id } => write!(f, "query {id}: text is empty after trimming"),
            PromptError::UnknownShotLabel { label } => {
                write!(f, "shot label {label:?} is not in the task's class set")
            }
            PromptError::InvalidTask(msg) => write!(f, "invalid task spec: {msg}"),
        }
    }
}

impl TaskSpec {
    pub fn binary(name: &str, definition: &str, pos: &str, neg: &str) -> TaskSpec {
        let mut answer_tokens = BTreeMap::new();
        answer_tokens.insert(String::from(pos), String::from(pos));
        answer_tokens.insert(String::from(neg), String::from(neg));
        TaskSpec {
            name: name.into(),
            definition: definition.into(),
            classes: [pos, neg].iter().map(|s| String::from(*s)).collect(),
            answer_tokens,
            kind: TaskKind::Binary,
        }
    }

    pub fn multiclass(name: &str, definition: &str, classes: &[&str]) -> TaskSpec {
        TaskSpec {
            name: name.into(),
            definition: definition.into(),
            classes: classes.iter().map(|s| String::from(*s)).collect(),
            answer_tokens: classes.iter().map(|s| (String::from(*s), String::from(*s))).collect(),
            kind: TaskKind::Multiclass,
        }
    }

    /// Checks the classes/answer-token bijection and the binary arity rule.
    pub fn validate(&self) -> Result<(), PromptError> {
        if self.classes.is_empty() {
            return Err(PromptError::InvalidTask("no classes".into()));
        }
        if self.kind == TaskKind::Binary && self.classes.len() != 2 {
            return Err(PromptError::InvalidTask("binary tasks need exactly 2 classes".into()));
        }
        if self.answer_tokens.len() != self.classes.len() {
            return Err(PromptError::InvalidTask("classes and answer tokens must be bijective".into()));
        }
        let mut tokens: Vec<&str> = Vec::new();
        for class in &self.classes {
            let tok = self
                .answer_tokens
                .get(class)
                .ok_or_else(|| PromptError::InvalidTask(alloc::format!("class {class:?} has no answer token")))?;
            if tokens.contains(&tok.as_str()) {
                return Err(PromptError::InvalidTask("answer tokens must be distinct".into()));
            }
            tokens.push(tok);
        }
        Ok(())
    }

    pub fn answer_token(&self, class: &str) -> Option<&str> {
        self.answer_tokens.get(class).map(String::as_str)
    }

    /// Answer tokens in class order.
    pub fn candidates(&self) -> Vec<String> {
        self.classes.iter().map(|c| self.answer_tokens[c].clone()).collect()
    }

    /// Maps an answer token back to its class label.
    pub fn class_for_token(&self, token: &str) -> Option<&str> {
        self.classes
            .iter()
            .find(|c| self.answer_tokens[c.as_str()] == token)
            .map(String::as_str)
    }

    pub fn positive_class(&self) -> &str {
        &self.classes[0]
    }

    pub fn is_binary(&self) -> bool {
        self.kind == TaskKind::Binary
    }
}

/// Built-in catalog: the eight bias tasks with their definition questions
/// and answer tokens.
pub fn builtin_tasks() -> Vec<TaskSpec> {
    alloc::vec![
        TaskSpec::binary("offensive", "Does this post contain offensive language?", "Yes", "No"),
        TaskSpec::binary("intent", "Does this post contain intentional insults?", "Yes", "No"),
        TaskSpec::binary("lewd", "Does this post contain sexual content?", "Yes", "No"),
        TaskSpec::binary("group", "Does this post contain offense to a group?", "Yes", "No"),
        TaskSpec::multiclass(
            "who",
            "Who is referred to/targeted by this post - body, culture, disabled, gender, race, social, victim?",
            &["body", "culture", "disabled", "gender", "race", "social", "victim"],
        ),
        TaskSpec::binary(
            "hof",
            "Does this post contain any form of non-acceptable language such as hate speech, offensiveness, aggression, profanity?",
            "Yes",
            "No",
        ),
        TaskSpec::multiclass("hop", "This post contains", &["hate", "offense", "profanity"]),
        TaskSpec::binary(
            "target",
            "Does this post contain an insult/threat to an individual, group, or others?",
            "Yes",
            "No",
        ),
    ]
}

pub fn builtin_task(name: &str) -> Option<TaskSpec> {
    builtin_tasks().into_iter().find(|t| t.name == name)
}

/// Which prompt components carry content. Dropped components keep their
/// structural tag with empty content.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptAblation {
    pub include_shot_text: bool,
    pub include_definition: bool,
    pub include_query: bool,
    pub include_shot_labels: bool,
}

impl Default for PromptAblation {
    fn default() -> Self {
        PromptAblation {
            include_shot_text: true,
            include_definition: true,
            include_query: true,
            include_shot_labels: true,
        }
    }
}

impl PromptAblation {
    pub fn is_full(&self) -> bool {
        *self == PromptAblation::default()
    }
}

/// An assembled instruction string plus the answer candidates to score,
/// aligned with the task's class order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prompt {
    pub text: String,
    pub answer_candidates: Vec<String>,
}

const POST_TAG: &str = "Post:";
const QUESTION_TAG: &str = "Question:";
const ANSWER_TAG: &str = "Answer:";

fn tag_line(out: &mut String, tag: &str, content: &str) {
    out.push_str(tag);
    if !content.is_empty() {
        out.push(' ');
        out.push_str(content);
    }
}

/// "Post: {Q}\nQuestion: {d}\nAnswer:" with no exemplars.
pub fn build_zero_shot(task: &TaskSpec, query: &Post) -> Result<Prompt, PromptError> {
    build_few_shot_inner(task, &[], query, &PromptAblation::default())
}

/// Exemplar blocks followed by the query block. Each shot renders as
/// "Post: {x}\nQuestion: {d}\nAnswer: {token}" with a blank line between
/// blocks; ablation flags blank out content while keeping the tags.
pub fn build_few_shot(
    task: &TaskSpec,
    shots: &ShotSet,
    query: &Post,
    ablation: &PromptAblation,
) -> Result<Prompt, PromptError> {
    let rendered: Vec<(&str, &str)> = shots
        .shots
        .iter()
        .map(|s| {
            let token = task
                .answer_token(&s.presented_label)
                .ok_or_else(|| PromptError::UnknownShotLabel { label: s.presented_label.clone() })?;
            Ok((s.post.text.as_str(), token))
        })
        .collect::<Result<_, _>>()?;
    build_few_shot_inner(task, &rendered, query, ablation)
}

fn build_few_shot_inner(
    task: &TaskSpec,
    shots: &[(&str, &str)],
    query: &Post,
    ablation: &PromptAblation,
) -> Result<Prompt, PromptError> {
    if query.text.trim().is_empty() {
        return Err(PromptError::EmptyQuery { id: query.id.clone() });
    }
    let definition = if ablation.include_definition { task.definition.as_str() } else { "" };

    let mut text = String::new();
    for (shot_text, token) in shots {
        tag_line(&mut text, POST_TAG, if ablation.include_shot_text { shot_text } else { "" });
        text.push('\n');
        tag_line(&mut text, QUESTION_TAG, definition);
        text.push('\n');
        tag_line(&mut text, ANSWER_TAG, if ablation.include_shot_labels { token } else { "" });
        text.push_str("\n\n");
    }
    tag_line(&mut text, POST_TAG, if ablation.include_query { query.text.as_str() } else { "" });
    text.push('\n');
    tag_line(&mut text, QUESTION_TAG, definition);
    text.push('\n');
    text.push_str(ANSWER_TAG);

    Ok(Prompt { text, answer_candidates: task.candidates() })
}
