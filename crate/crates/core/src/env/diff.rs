use std::collections::BTreeSet;

use super::{Control, EnvironmentSnapshot};

pub const NO_CHANGE: &str = "no observable change";

fn describe(c: &Control) -> String {
    format!("[{}] {} \"{}\"", c.label, c.kind, c.title)
}

/// Human-readable summary of what changed between two snapshots. Ignores
/// `step` and `last_result`.
pub fn diff(before: &EnvironmentSnapshot, after: &EnvironmentSnapshot) -> String {
    let mut lines = Vec::new();

    for app in &after.apps {
        let prev = before.app(&app.name);
        let was_open = prev.is_some_and(|p| p.open);
        if app.open && !was_open {
            lines.push(format!("opened {}", app.name));
        }
        if !app.open && was_open {
            lines.push(format!("closed {}", app.name));
        }
        if let Some(p) = prev {
            if p.state != app.state {
                lines.push(format!("{} changed state: {} -> {}", app.name, p.state, app.state));
            }
        }
    }

    let fg_before = before.foreground().map(|a| a.name.as_str());
    let fg_after = after.foreground().map(|a| a.name.as_str());
    if fg_before != fg_after {
        lines.push(format!(
            "foreground: {} -> {}",
            fg_before.unwrap_or("desktop"),
            fg_after.unwrap_or("desktop")
        ));
    }

    let old: BTreeSet<String> = before.controls.iter().map(describe).collect();
    let new: BTreeSet<String> = after.controls.iter().map(describe).collect();
    let added: Vec<&String> = new.difference(&old).collect();
    let removed: Vec<&String> = old.difference(&new).collect();
    if !added.is_empty() {
        lines.push(format!("controls added: {}", join(&added)));
    }
    if !removed.is_empty() {
        lines.push(format!("controls removed: {}", join(&removed)));
    }

    for (path, content) in &after.files {
        match before.files.get(path) {
            None => lines.push(format!("file created: {path}")),
            Some(prev) if prev != content => lines.push(format!("file changed: {path}")),
            Some(_) => {}
        }
    }
    for path in before.files.keys() {
        if !after.files.contains_key(path) {
            lines.push(format!("file removed: {path}"));
        }
    }

    if lines.is_empty() {
        NO_CHANGE.to_string()
    } else {
        lines.join("\n")
    }
}

fn join(items: &[&String]) -> String {
    items.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
}
