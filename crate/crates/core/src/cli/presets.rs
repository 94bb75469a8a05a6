//! Bundled run configurations, addressed as `preset:NAME`.

pub const LINEAR: &str = include_str!("../../presets/linear.toml");
pub const DESK: &str = include_str!("../../presets/desk.toml");
pub const SCHEDULE: &str = include_str!("../../presets/schedule.toml");
pub const EPSILON: &str = include_str!("../../presets/epsilon.toml");

pub const NAMES: [&str; 4] = ["linear", "desk", "schedule", "epsilon"];

pub fn get(name: &str) -> Option<&'static str> {
    match name {
        "linear" => Some(LINEAR),
        "desk" => Some(DESK),
        "schedule" | "default" => Some(SCHEDULE),
        "epsilon" => Some(EPSILON),
        _ => None,
    }
}
