use serde::{Deserialize, Serialize};

use super::{EnvironmentSnapshot, FORMAT_VERSION};

pub const DESKTOP_PLACEHOLDER: &str = "Desktop (no foreground window)";

/// Three-part view of the environment handed to decision agents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerceptionBundle {
    pub format_version: u32,
    pub raw_view: String,
    pub annotated_view: String,
    pub controls_listing: String,
}

fn open_apps_line(env: &EnvironmentSnapshot) -> String {
    let open: Vec<&str> = env.apps.iter().filter(|a| a.open).map(|a| a.name.as_str()).collect();
    if open.is_empty() {
        "Open applications: (none)".to_string()
    } else {
        format!("Open applications: {}", open.join(", "))
    }
}

pub fn perceive(env: &EnvironmentSnapshot) -> PerceptionBundle {
    let Some(fg) = env.foreground() else {
        let raw = format!("{DESKTOP_PLACEHOLDER}\n{}\n", open_apps_line(env));
        return PerceptionBundle {
            format_version: FORMAT_VERSION,
            annotated_view: raw.clone(),
            raw_view: raw,
            controls_listing: String::new(),
        };
    };

    let header = format!("Window: {} [{}]\n{}\n", fg.name, fg.state, open_apps_line(env));
    let mut raw = header.clone();
    let mut annotated = header;
    let mut listing = String::from("label | kind | title\n");
    for c in &env.controls {
        let disabled = if c.enabled { "" } else { " (disabled)" };
        raw.push_str(&format!("  {} \"{}\"{}\n", c.kind, c.title, disabled));
        annotated.push_str(&format!("  [{}] {} \"{}\"{}\n", c.label, c.kind, c.title, disabled));
        listing.push_str(&format!("{} | {} | {}\n", c.label, c.kind, c.title));
    }
    PerceptionBundle { format_version: FORMAT_VERSION, raw_view: raw, annotated_view: annotated, controls_listing: listing }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{AppEntry, Control};

    fn edge_env() -> EnvironmentSnapshot {
        EnvironmentSnapshot {
            step: 0,
            apps: vec![AppEntry { name: "Microsoft Edge".into(), open: true, foreground: true, state: "home".into() }],
            controls: vec![
                Control::new(0, "Edit", "Address and search bar"),
                Control::new(1, "Button", "Search"),
                Control::new(2, "TabItem", "New tab"),
            ],
            files: Default::default(),
            last_result: None,
        }
    }

    #[test]
    fn desktop_has_no_listing() {
        let mut env = edge_env();
        env.apps[0].foreground = false;
        env.controls.clear();
        let b = perceive(&env);
        assert!(b.controls_listing.is_empty());
        assert!(b.raw_view.starts_with(DESKTOP_PLACEHOLDER));
    }

    #[test]
    fn listing_rows_match_controls() {
        let env = edge_env();
        let b = perceive(&env);
        let rows: Vec<&str> = b.controls_listing.lines().skip(1).collect();
        assert_eq!(rows.len(), env.controls.len());
        for (i, row) in rows.iter().enumerate() {
            assert!(row.starts_with(&format!("{i} |")));
            assert!(b.annotated_view.contains(&format!("[{i}]")));
        }
        assert_eq!(perceive(&env), b);
    }
}
