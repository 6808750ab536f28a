//! Agent response envelopes and their validating parser.

use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};

use super::extract::first_json_object;
use super::{BranchType, ModelError, Role};

/// A concrete action request: action name plus named arguments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionInvocation {
    pub action: String,
    #[serde(default)]
    pub args: BTreeMap<String, Value>,
}

impl ActionInvocation {
    pub fn new(action: impl Into<String>) -> Self {
        Self { action: action.into(), args: BTreeMap::new() }
    }

    pub fn arg(mut self, name: impl Into<String>, value: impl Into<Value>) -> Self {
        self.args.insert(name.into(), value.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct PlannerPayload {
    pub sub_tasks: Vec<String>,
    pub question: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistributionEntry {
    /// Kept as free text: the scheduler may name a role that does not exist.
    pub role: String,
    pub role_tasks: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct SchedulerPayload {
    pub distribution: Vec<DistributionEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct DecisionPayload {
    pub thought_process: Vec<String>,
    pub local_plan: Vec<String>,
    pub intention: String,
    pub operation: Option<ActionInvocation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub information: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selected_control: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analyze: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Success,
    Failure,
}

impl Verdict {
    /// Reads the closing token of a judgement. Anything other than a trailing
    /// SUCCESS/FAILURE (any case, punctuation ignored) counts as a failure.
    pub fn from_judgement(judgement: &str) -> Verdict {
        let last = judgement
            .split_whitespace()
            .last()
            .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()))
            .unwrap_or("");
        if last.eq_ignore_ascii_case("success") {
            Verdict::Success
        } else {
            Verdict::Failure
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewerPayload {
    pub analyze: String,
    pub judgement: String,
    pub verdict: Verdict,
}

/// Planner output when asked for the final answer rather than a plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct AnswerPayload {
    pub answer: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Payload {
    Planner(PlannerPayload),
    Scheduler(SchedulerPayload),
    Decision(DecisionPayload),
    Reviewer(ReviewerPayload),
    Answer(AnswerPayload),
}

/// Which output format a completion is expected to follow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResponseSchema {
    Planner,
    Scheduler,
    Decision(Role),
    Reviewer,
    FinalAnswer,
}

impl ResponseSchema {
    pub fn for_role(role: Role) -> Option<ResponseSchema> {
        match role {
            Role::Planner => Some(ResponseSchema::Planner),
            Role::TaskScheduler => Some(ResponseSchema::Scheduler),
            Role::Reviewer => Some(ResponseSchema::Reviewer),
            Role::Executor => None,
            pool => Some(ResponseSchema::Decision(pool)),
        }
    }

    fn role(self) -> Role {
        match self {
            ResponseSchema::Planner | ResponseSchema::FinalAnswer => Role::Planner,
            ResponseSchema::Scheduler => Role::TaskScheduler,
            ResponseSchema::Reviewer => Role::Reviewer,
            ResponseSchema::Decision(role) => role,
        }
    }

    /// Field list shown to the model when it has to repair its output.
    pub fn field_summary(self) -> String {
        let mut fields = vec![
            ("branch", "one of: ".to_string() + &branch_list(self.role())),
            ("problem", "string, empty unless the branch reports a problem".into()),
            ("message", "string".into()),
            ("summary", "string".into()),
        ];
        match self {
            ResponseSchema::Planner => {
                fields.push(("sub_tasks", "list of strings".into()));
                fields.push(("question", "string".into()));
            }
            ResponseSchema::Scheduler => fields.push((
                "distribution",
                "list of {\"role\": string, \"role_tasks\": list of strings}".into(),
            )),
            ResponseSchema::Reviewer => {
                fields.push(("analyze", "string".into()));
                fields.push(("judgement", "string ending with SUCCESS or FAILURE".into()));
            }
            ResponseSchema::FinalAnswer => fields.push(("answer", "non-empty string".into())),
            ResponseSchema::Decision(role) => {
                fields.push(("thought_process", "list of strings".into()));
                fields.push(("local_plan", "list of strings".into()));
                fields.push(("intention", "string".into()));
                fields.push((
                    "operation",
                    "null or {\"action\": string, \"args\": object}".into(),
                ));
                for name in required_extras(role) {
                    fields.push((name, "string".into()));
                }
            }
        }
        let mut out = String::from("{\n");
        for (i, (name, kind)) in fields.iter().enumerate() {
            let comma = if i + 1 == fields.len() { "" } else { "," };
            out.push_str(&format!("  \"{name}\": \"{kind}\"{comma}\n"));
        }
        out.push('}');
        out
    }
}

fn branch_list(role: Role) -> String {
    role.admissible_branches()
        .iter()
        .map(|b| b.as_str())
        .collect::<Vec<_>>()
        .join(", ")
}

fn required_extras(role: Role) -> &'static [&'static str] {
    match role {
        Role::Searcher => &["observation", "information"],
        Role::Programmer => &["analyze", "answer"],
        Role::ApplicationManager => &["analyze"],
        _ => &[],
    }
}

/// One validated agent turn.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentResponse {
    pub role: Role,
    pub branch: BranchType,
    pub problem: String,
    pub message: String,
    pub summary: String,
    pub payload: Payload,
}

impl AgentResponse {
    pub fn planner(&self) -> Option<&PlannerPayload> {
        match &self.payload {
            Payload::Planner(p) => Some(p),
            _ => None,
        }
    }

    pub fn scheduler(&self) -> Option<&SchedulerPayload> {
        match &self.payload {
            Payload::Scheduler(p) => Some(p),
            _ => None,
        }
    }

    pub fn decision(&self) -> Option<&DecisionPayload> {
        match &self.payload {
            Payload::Decision(p) => Some(p),
            _ => None,
        }
    }

    pub fn reviewer(&self) -> Option<&ReviewerPayload> {
        match &self.payload {
            Payload::Reviewer(p) => Some(p),
            _ => None,
        }
    }

    pub fn answer(&self) -> Option<&AnswerPayload> {
        match &self.payload {
            Payload::Answer(p) => Some(p),
            _ => None,
        }
    }

    /// The flat wire object: envelope fields followed by payload fields.
    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("agent responses always serialize")
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(self).expect("agent responses always serialize")
    }
}

impl Serialize for AgentResponse {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = Map::new();
        map.insert("role".into(), Value::String(self.role.id().into()));
        map.insert("branch".into(), Value::String(self.branch.as_str().into()));
        map.insert("problem".into(), Value::String(self.problem.clone()));
        map.insert("message".into(), Value::String(self.message.clone()));
        map.insert("summary".into(), Value::String(self.summary.clone()));
        let payload = serde_json::to_value(&self.payload).map_err(serde::ser::Error::custom)?;
        if let Value::Object(fields) = payload {
            map.extend(fields);
        }
        map.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for AgentResponse {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let map = Map::<String, Value>::deserialize(deserializer)?;
        let role: Role = map
            .get("role")
            .cloned()
            .ok_or_else(|| serde::de::Error::missing_field("role"))
            .and_then(|v| serde_json::from_value(v).map_err(serde::de::Error::custom))?;
        let schema = if role == Role::Planner && map.contains_key("answer") && !map.contains_key("sub_tasks") {
            ResponseSchema::FinalAnswer
        } else {
            ResponseSchema::for_role(role)
                .ok_or_else(|| serde::de::Error::custom("executor has no response schema"))?
        };
        parse_object(map, schema).map_err(serde::de::Error::custom)
    }
}

/// Parses raw model text as a response of `role`.
pub fn parse_agent_response(raw: &str, role: Role) -> Result<AgentResponse, ModelError> {
    let schema = ResponseSchema::for_role(role).ok_or_else(|| {
        ModelError::MalformedResponse(format!("role {} does not produce responses", role.id()))
    })?;
    parse_with_schema(raw, schema)
}

pub fn parse_with_schema(raw: &str, schema: ResponseSchema) -> Result<AgentResponse, ModelError> {
    let map = first_json_object(raw)
        .ok_or_else(|| ModelError::MalformedResponse("no JSON object found in response".into()))?;
    parse_object(map, schema)
}

fn parse_object(map: Map<String, Value>, schema: ResponseSchema) -> Result<AgentResponse, ModelError> {
    let role = schema.role();
    let fields = Fields(&map);

    let branch_raw = fields.required_str("branch")?;
    let branch = BranchType::parse(&branch_raw)
        .ok_or_else(|| ModelError::MalformedResponse(format!("unknown branch value {branch_raw:?}")))?;
    if !role.admits(branch) {
        return Err(ModelError::InadmissibleBranch { role, branch });
    }

    let problem = fields.required_str("problem")?;
    let message = fields.required_str("message")?;
    let summary = fields.required_str("summary")?;

    if branch.reports_problem() && problem.trim().is_empty() {
        return Err(ModelError::MalformedResponse(format!(
            "branch {} requires a non-empty problem",
            branch.as_str()
        )));
    }
    if !branch.reports_problem() && !problem.trim().is_empty() {
        return Err(ModelError::MalformedResponse(format!(
            "problem must be empty when branch is {}",
            branch.as_str()
        )));
    }

    let payload = match schema {
        ResponseSchema::Planner => {
            let sub_tasks = fields.required_str_list("sub_tasks")?;
            if branch == BranchType::Continue && sub_tasks.is_empty() {
                return Err(ModelError::MalformedResponse(
                    "sub_tasks must not be empty when branch is Continue".into(),
                ));
            }
            Payload::Planner(PlannerPayload { sub_tasks, question: fields.required_str("question")? })
        }
        ResponseSchema::Scheduler => {
            let raw = map
                .get("distribution")
                .ok_or_else(|| missing("distribution"))?;
            let distribution: Vec<DistributionEntry> = serde_json::from_value(raw.clone())
                .map_err(|e| ModelError::MalformedResponse(format!("distribution: {e}")))?;
            Payload::Scheduler(SchedulerPayload { distribution })
        }
        ResponseSchema::Reviewer => {
            let judgement = fields.required_str("judgement")?;
            Payload::Reviewer(ReviewerPayload {
                analyze: fields.required_str("analyze")?,
                verdict: Verdict::from_judgement(&judgement),
                judgement,
            })
        }
        ResponseSchema::FinalAnswer => {
            let answer = fields.required_str("answer")?;
            if branch == BranchType::Continue && answer.trim().is_empty() {
                return Err(ModelError::MalformedResponse("answer must not be empty".into()));
            }
            Payload::Answer(AnswerPayload { answer })
        }
        ResponseSchema::Decision(role) => {
            for name in required_extras(role) {
                if !map.contains_key(*name) {
                    return Err(missing(name));
                }
            }
            let payload = DecisionPayload {
                thought_process: fields.required_str_list("thought_process")?,
                local_plan: fields.required_str_list("local_plan")?,
                intention: fields.required_str("intention")?,
                operation: parse_operation(map.get("operation"))?,
                observation: fields.optional_str("observation")?,
                information: fields.optional_str("information")?,
                selected_control: fields.optional_str("selected_control")?,
                analyze: fields.optional_str("analyze")?,
                answer: fields.optional_str("answer")?,
            };
            if role == Role::Programmer
                && payload.answer.as_deref().is_some_and(|a| !a.trim().is_empty())
                && branch != BranchType::RoleTaskFinish
            {
                return Err(ModelError::MalformedResponse(
                    "a non-empty answer completes the task: branch must be RoleTaskFinish".into(),
                ));
            }
            Payload::Decision(payload)
        }
    };

    Ok(AgentResponse { role, branch, problem, message, summary, payload })
}

fn parse_operation(value: Option<&Value>) -> Result<Option<ActionInvocation>, ModelError> {
    match value {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) if s.trim().is_empty() => Ok(None),
        Some(Value::Object(obj)) if obj.is_empty() => Ok(None),
        Some(Value::Object(obj)) => {
            let action = obj
                .get("action")
                .and_then(Value::as_str)
                .ok_or_else(|| ModelError::MalformedResponse("operation.action must be a string".into()))?;
            let args = match obj.get("args") {
                None | Some(Value::Null) => BTreeMap::new(),
                Some(Value::Object(args)) => args.iter().map(|(k, v)| (k.clone(), v.clone())).collect(),
                Some(_) => {
                    return Err(ModelError::MalformedResponse("operation.args must be an object".into()))
                }
            };
            Ok(Some(ActionInvocation { action: action.to_string(), args }))
        }
        Some(other) => Err(ModelError::MalformedResponse(format!(
            "operation must be an object or empty, got {other}"
        ))),
    }
}

fn missing(field: &str) -> ModelError {
    ModelError::MalformedResponse(format!("missing field `{field}`"))
}

struct Fields<'a>(&'a Map<String, Value>);

impl Fields<'_> {
    fn required_str(&self, name: &str) -> Result<String, ModelError> {
        match self.0.get(name) {
            None => Err(missing(name)),
            Some(v) => text(name, v),
        }
    }

    fn optional_str(&self, name: &str) -> Result<Option<String>, ModelError> {
        match self.0.get(name) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => text(name, v).map(Some),
        }
    }

    fn required_str_list(&self, name: &str) -> Result<Vec<String>, ModelError> {
        match self.0.get(name) {
            None => Err(missing(name)),
            Some(Value::Null) => Ok(Vec::new()),
            Some(Value::String(s)) => Ok(vec![s.clone()]),
            Some(Value::Array(items)) => items.iter().map(|v| text(name, v)).collect(),
            Some(_) => Err(ModelError::MalformedResponse(format!("`{name}` must be a list of strings"))),
        }
    }
}

fn text(name: &str, value: &Value) -> Result<String, ModelError> {
    match value {
        Value::Null => Ok(String::new()),
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        Value::Bool(b) => Ok(b.to_string()),
        _ => Err(ModelError::MalformedResponse(format!("`{name}` must be a string"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn planner_json(branch: &str, problem: &str, tasks: &[&str]) -> String {
        json!({
            "branch": branch, "problem": problem, "message": "", "summary": "planned",
            "sub_tasks": tasks, "question": ""
        })
        .to_string()
    }

    #[test]
    fn planner_continue() {
        let raw = planner_json("Continue", "", &["Open the browser.", "Search for the weather today."]);
        let resp = parse_agent_response(&raw, Role::Planner).unwrap();
        assert_eq!(resp.branch, BranchType::Continue);
        assert_eq!(resp.planner().unwrap().sub_tasks.len(), 2);
    }

    #[test]
    fn planner_empty_plan_rejected() {
        let raw = planner_json("Continue", "", &[]);
        assert!(matches!(parse_agent_response(&raw, Role::Planner), Err(ModelError::MalformedResponse(_))));
    }

    #[test]
    fn scheduler_rejects_role_task_finish() {
        let raw = json!({
            "branch": "RoleTaskFinish", "problem": "", "message": "", "summary": "",
            "distribution": []
        })
        .to_string();
        assert_eq!(
            parse_agent_response(&raw, Role::TaskScheduler),
            Err(ModelError::InadmissibleBranch { role: Role::TaskScheduler, branch: BranchType::RoleTaskFinish })
        );
    }

    #[test]
    fn interrupt_needs_problem() {
        let raw = planner_json("Interrupt", "", &[]);
        assert!(parse_agent_response(&raw, Role::Planner).is_err());
        let raw = planner_json("Interrupt", "cannot proceed", &[]);
        assert_eq!(parse_agent_response(&raw, Role::Planner).unwrap().branch, BranchType::Interrupt);
    }

    #[test]
    fn programmer_answer_forces_finish() {
        let base = json!({
            "thought_process": [], "local_plan": [], "intention": "", "operation": null,
            "branch": "Continue", "problem": "", "message": "", "summary": "",
            "analyze": "", "answer": "42"
        });
        assert!(parse_agent_response(&base.to_string(), Role::Programmer).is_err());
        let mut fixed = base.clone();
        fixed["branch"] = json!("RoleTaskFinish");
        assert!(parse_agent_response(&fixed.to_string(), Role::Programmer).is_ok());
    }

    #[test]
    fn verdict_from_last_token() {
        assert_eq!(Verdict::from_judgement("The browser opened. SUCCESS"), Verdict::Success);
        assert_eq!(Verdict::from_judgement("looks fine, success."), Verdict::Success);
        assert_eq!(Verdict::from_judgement("SUCCESS was not reached. FAILURE"), Verdict::Failure);
        assert_eq!(Verdict::from_judgement("no token at all"), Verdict::Failure);
        assert_eq!(Verdict::from_judgement(""), Verdict::Failure);
    }

    #[test]
    fn operation_empty_forms() {
        for op in [json!(null), json!(""), json!({})] {
            let raw = json!({
                "thought_process": ["t"], "local_plan": [], "intention": "think", "operation": op,
                "branch": "Continue", "problem": "", "message": "", "summary": ""
            });
            let resp = parse_agent_response(&raw.to_string(), Role::FileManager).unwrap();
            assert!(resp.decision().unwrap().operation.is_none());
        }
    }

    #[test]
    fn searcher_requires_observation() {
        let raw = json!({
            "thought_process": [], "local_plan": [], "intention": "", "operation": null,
            "branch": "Continue", "problem": "", "message": "", "summary": "", "information": ""
        });
        let err = parse_agent_response(&raw.to_string(), Role::Searcher).unwrap_err();
        assert!(err.to_string().contains("observation"));
    }
}
