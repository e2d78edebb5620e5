use std::path::Path;

use serde::Deserialize;
use toml::{Table, Value};

use crate::trainer::{ExperimentConfig, PlantTable};

use super::{CliError, ENV_PREFIX};

/// Reads a TOML experiment config, applies `COUPLED_LAB__SECTION__KEY`
/// environment overrides and fills in defaults.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse_config_str(&text, std::env::vars()).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// [`parse_config`] on text, with the environment given explicitly. Variables
/// without the prefix are ignored.
pub fn parse_config_str(
    text: &str,
    env: impl IntoIterator<Item = (String, String)>,
) -> Result<ExperimentConfig, CliError> {
    let mut table: Table = text.parse().map_err(|e: toml::de::Error| CliError::Config(e.message().to_string()))?;
    let mut overrides: Vec<(String, String)> =
        env.into_iter().filter(|(k, _)| k.starts_with(&format!("{ENV_PREFIX}__"))).collect();
    overrides.sort();
    for (key, raw) in overrides {
        let path: Vec<String> = key[ENV_PREFIX.len() + 2..].split("__").map(|s| s.to_ascii_lowercase()).collect();
        apply_override(&mut table, &path, &raw).map_err(|m| CliError::Config(format!("{key}: {m}")))?;
    }
    from_table(table)
}

fn env_value(raw: &str) -> Value {
    match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.to_string())),
        Err(_) => Value::String(raw.to_string()),
    }
}

fn apply_override(table: &mut Table, path: &[String], raw: &str) -> Result<(), String> {
    let Some((last, parents)) = path.split_last() else {
        return Err("empty key".into());
    };
    if path.iter().any(|p| p.is_empty()) {
        return Err("empty key segment".into());
    }
    let mut cur = table;
    for p in parents {
        let slot = cur.entry(p.clone()).or_insert_with(|| Value::Table(Table::new()));
        // `plant = "arm"` becomes `[plant] kind = "arm"` so fields can be set
        if let (true, Value::String(kind)) = (p == "plant", &*slot) {
            let mut t = Table::new();
            t.insert("kind".into(), Value::String(kind.clone()));
            *slot = Value::Table(t);
        }
        cur = slot.as_table_mut().ok_or_else(|| format!("`{p}` is not a table"))?;
    }
    cur.insert(last.clone(), env_value(raw));
    Ok(())
}

fn deserialize_strict<T: for<'de> Deserialize<'de>>(value: Value, prefix: &str) -> Result<T, CliError> {
    let mut unknown = Vec::new();
    let mut note = |p: serde_ignored::Path| unknown.push(p.to_string());
    let de = serde_ignored::Deserializer::new(value, &mut note);
    let parsed: Result<T, _> = serde_path_to_error::deserialize(de);
    let parsed = parsed.map_err(|e| {
        let at = e.path().to_string();
        let at = match (prefix.is_empty(), at.as_str()) {
            (_, ".") => prefix.to_string(),
            (true, _) => at,
            (false, _) => format!("{prefix}.{at}"),
        };
        CliError::Config(format!("{at}: {}", e.inner()))
    })?;
    if !unknown.is_empty() {
        let keys: Vec<String> =
            unknown.iter().map(|k| if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") }).collect();
        return Err(CliError::Config(format!("unknown key(s): {}", keys.join(", "))));
    }
    Ok(parsed)
}

fn from_table(table: Table) -> Result<ExperimentConfig, CliError> {
    // the plant enum is untagged, so its table is checked on its own first
    if let Some(Value::Table(plant)) = table.get("plant") {
        deserialize_strict::<PlantTable>(Value::Table(plant.clone()), "plant")?;
    }
    let cfg: ExperimentConfig = deserialize_strict(Value::Table(table), "")?;
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(cfg)
}

/// The config with every default written out, as TOML.
pub fn effective_toml(cfg: &ExperimentConfig) -> Result<String, CliError> {
    let eff = cfg.effective().map_err(|e| CliError::Config(e.to_string()))?;
    toml::to_string(&eff).map_err(|e| CliError::Config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::LossKind;
    use crate::trainer::{PlantConfig, PlantName};

    fn parse(text: &str) -> Result<ExperimentConfig, CliError> {
        parse_config_str(text, Vec::new())
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse("plant = \"pendulum\"\nloss = \"joint\"\nseed = 1\n").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert_eq!(parse("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn unknown_keys_are_named() {
        let e = parse("[optimizer]\nlerning_rate = 0.1\n").unwrap_err();
        assert!(e.to_string().contains("optimizer.lerning_rate"), "{e}");
        let e = parse("lerning_rate = 0.1\n").unwrap_err();
        assert!(e.to_string().contains("lerning_rate"), "{e}");
        let e = parse("[plant]\nkind = \"arm\"\nlinkz = 2\n").unwrap_err();
        assert!(e.to_string().contains("plant.linkz"), "{e}");
    }

    #[test]
    fn bad_values_name_their_key() {
        let e = parse("[optimizer]\nlr = \"fast\"\n").unwrap_err();
        assert!(e.to_string().contains("optimizer.lr"), "{e}");
        let e = parse("[optimizer]\nlr = -1.0\n").unwrap_err();
        assert!(e.to_string().contains("optimizer.lr"), "{e}");
        assert!(matches!(parse("seed = [").unwrap_err(), CliError::Config(_)));
        assert!(parse("loss = \"magic\"\n").unwrap_err().to_string().contains("loss"));
    }

    #[test]
    fn parsing_is_repeatable() {
        let text = "seed = 4\nloss = \"task\"\n[plant]\nkind = \"arm\"\nlinks = 2\n[loop]\niterations = 3\n";
        assert_eq!(parse(text).unwrap(), parse(text).unwrap());
    }

    #[test]
    fn environment_overrides_file_values() {
        let env = vec![
            ("COUPLED_LAB__LOOP__ITERATIONS".to_string(), "7".to_string()),
            ("COUPLED_LAB__LOSS".to_string(), "distal_teacher".to_string()),
            ("COUPLED_LAB__PLANT__LINKS".to_string(), "2".to_string()),
            ("UNRELATED".to_string(), "x".to_string()),
        ];
        let c = parse_config_str("plant = \"arm\"\n[loop]\niterations = 2\n", env).unwrap();
        assert_eq!(c.schedule.iterations, 7);
        assert_eq!(c.loss, LossKind::DistalTeacher);
        assert!(matches!(&c.plant, PlantConfig::Table(t) if t.kind == PlantName::Arm && t.links == Some(2)));

        let bad = vec![("COUPLED_LAB__LOOP__ITERATIONZ".to_string(), "7".to_string())];
        assert!(parse_config_str("", bad).unwrap_err().to_string().contains("loop.iterationz"));
    }

    #[test]
    fn effective_config_round_trips() {
        let c = parse("plant = \"hopper\"\n").unwrap();
        let text = effective_toml(&c).unwrap();
        let back = parse(&text).unwrap();
        assert_eq!(back.effective().unwrap(), c.effective().unwrap());
        assert!(text.contains("controller_lr"));
    }
}
