use std::collections::BTreeMap;
use std::path::Path;

use serde_json::Value;

use super::AgentError;
use crate::actions::ActionRegistry;
use crate::model::{BranchType, Role};

/// One pool member's natural-language expertise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoleDescriptor {
    pub name: Role,
    pub capability: String,
}

/// The four built-in decision agents.
pub fn builtin_pool() -> Vec<RoleDescriptor> {
    let d = |name, capability: &str| RoleDescriptor { name, capability: capability.to_string() };
    vec![
        d(Role::ApplicationManager, "Can open applications such as browsers, explorers, chat software, etc."),
        d(Role::FileManager, "Can open, create, and delete files, such as txt, xlsx, pdf, png, mp4 and other documents."),
        d(
            Role::Searcher,
            "Can use an opened browser to search for information, open web pages, etc. Can also do everything related to web pages, such as playing videos in web pages, opening files, reading documents in web pages, and so on.",
        ),
        d(
            Role::Programmer,
            "Possesses logical reasoning and analytical skills. Can reason to arrive at an answer to a question or write Python code to get the result.",
        ),
    ]
}

/// Pool capabilities as a JSON object keyed by display name, in pool order.
pub fn render_role_capabilities(pool: &[RoleDescriptor]) -> String {
    let mut out = String::from("{\n");
    for (i, d) in pool.iter().enumerate() {
        let comma = if i + 1 == pool.len() { "" } else { "," };
        out.push_str(&format!(
            "    {}: {}{}\n",
            Value::String(d.name.display_name().to_string()),
            Value::String(d.capability.clone()),
            comma
        ));
    }
    out.push('}');
    out
}

fn builtin_template(role: Role) -> Option<&'static str> {
    Some(match role {
        Role::Planner => include_str!("../../prompts/planner.txt"),
        Role::TaskScheduler => include_str!("../../prompts/task_scheduler.txt"),
        Role::Reviewer => include_str!("../../prompts/reviewer.txt"),
        Role::Searcher => include_str!("../../prompts/searcher.txt"),
        Role::Programmer => include_str!("../../prompts/programmer.txt"),
        Role::FileManager => include_str!("../../prompts/file_manager.txt"),
        Role::ApplicationManager => include_str!("../../prompts/application_manager.txt"),
        Role::Executor => return None,
    })
}

/// Per-role prompt and memory settings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentConfig {
    pub role: Role,
    pub system_template: String,
    /// Long-term records retrieved per call.
    pub lt_n: usize,
    /// Short-term entries shown per call.
    pub st_m: usize,
    pub allowed_branches: Vec<BranchType>,
}

impl AgentConfig {
    /// Built-in template and memory defaults; `None` for the executor.
    pub fn default_for(role: Role) -> Option<Self> {
        let template = builtin_template(role)?;
        let (lt_n, st_m) = if role.is_decision_agent() { (2, 6) } else { (3, 10) };
        Some(Self {
            role,
            system_template: template.to_string(),
            lt_n,
            st_m,
            allowed_branches: role.admissible_branches().to_vec(),
        })
    }
}

/// Agent configs for every LLM role, with templates optionally overridden by
/// `{dir}/{role_id}.txt`.
pub fn load_configs(prompt_dir: Option<&Path>) -> Result<BTreeMap<Role, AgentConfig>, AgentError> {
    let mut configs = BTreeMap::new();
    for role in Role::LLM_ROLES {
        let mut config = AgentConfig::default_for(role).expect("llm roles have templates");
        if let Some(dir) = prompt_dir {
            let path = dir.join(format!("{}.txt", role.id()));
            if path.exists() {
                config.system_template = std::fs::read_to_string(&path)
                    .map_err(|e| AgentError::Template(format!("{}: {e}", path.display())))?;
            }
        }
        configs.insert(role, config);
    }
    Ok(configs)
}

/// Placeholder names (`{like_this}`) still present in `text`.
pub fn placeholders(text: &str) -> Vec<String> {
    let bytes = text.as_bytes();
    let mut found = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'{' {
            let start = i + 1;
            let mut j = start;
            while j < bytes.len() && (bytes[j].is_ascii_lowercase() || bytes[j] == b'_' || (j > start && bytes[j].is_ascii_digit())) {
                j += 1;
            }
            if j > start && j < bytes.len() && bytes[j] == b'}' {
                found.push(text[start..j].to_string());
                i = j + 1;
                continue;
            }
        }
        i += 1;
    }
    found
}

/// Fills a template. Every placeholder must have a binding.
pub fn fill(template: &str, bindings: &[(&str, &str)]) -> Result<String, AgentError> {
    for name in placeholders(template) {
        if !bindings.iter().any(|(k, _)| *k == name) {
            return Err(AgentError::UnboundPlaceholder(name));
        }
    }
    let mut out = template.to_string();
    for (name, value) in bindings {
        out = out.replace(&format!("{{{name}}}"), value);
    }
    Ok(out)
}

/// The system prompt for `config.role`.
pub fn render_system_prompt(
    config: &AgentConfig,
    pool: &[RoleDescriptor],
    registry: &ActionRegistry,
) -> Result<String, AgentError> {
    let capabilities = render_role_capabilities(pool);
    let actions = registry.render_action_prompt(config.role);
    let all_actions = registry.render_all_actions_brief();
    fill(
        &config.system_template,
        &[
            ("role_capabilities", &capabilities),
            ("action_description", &actions),
            ("all_action_description", &all_actions),
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_placeholders_only() {
        assert_eq!(placeholders("a {x_1} {\n\"k\": 1} {Up} {}"), vec!["x_1"]);
    }

    #[test]
    fn unbound_placeholder() {
        assert_eq!(fill("hi {name} {other}", &[("name", "x")]), Err(AgentError::UnboundPlaceholder("other".into())));
        assert_eq!(fill("hi {name}", &[("name", "x")]).unwrap(), "hi x");
    }

    #[test]
    fn memory_defaults() {
        assert_eq!(AgentConfig::default_for(Role::Searcher).map(|c| (c.lt_n, c.st_m)), Some((2, 6)));
        assert_eq!(AgentConfig::default_for(Role::Reviewer).map(|c| (c.lt_n, c.st_m)), Some((3, 10)));
        assert!(AgentConfig::default_for(Role::Executor).is_none());
    }

    #[test]
    fn all_builtin_templates_render() {
        let registry = ActionRegistry::with_builtins();
        for role in Role::LLM_ROLES {
            let config = AgentConfig::default_for(role).unwrap();
            let text = render_system_prompt(&config, &builtin_pool(), &registry).unwrap();
            assert!(placeholders(&text).is_empty(), "{role}");
        }
    }
}
