//! Builtin systems and their default boxes.

use std::collections::BTreeMap;

use pfdyn_core::region::BoxRegion;
use pfdyn_core::system::{System, SystemSpec};

use crate::args::SystemArgs;
use crate::error::CliError;

const LORENZ: &str = r#"{
  "name": "lorenz",
  "dim": 3,
  "vars": ["a", "b", "c"],
  "components": [
    [{"coef": "-sigma", "powers": [1, 0, 0]}, {"coef": "sigma", "powers": [0, 1, 0]}],
    [{"coef": "rho", "powers": [1, 0, 0]}, {"coef": -1, "powers": [0, 1, 0]}, {"coef": -1, "powers": [1, 0, 1]}],
    [{"coef": 1, "powers": [1, 1, 0]}, {"coef": "-beta", "powers": [0, 0, 1]}]
  ],
  "params": {"sigma": 10, "rho": 28, "beta": 2.6666666666666665}
}"#;

const LOGISTIC: &str = r#"{
  "name": "logistic",
  "dim": 1,
  "vars": ["a"],
  "components": [[{"coef": "alpha", "powers": [1]}, {"coef": "-alpha", "powers": [2]}]],
  "params": {"alpha": 1}
}"#;

const HARMONIC: &str = r#"{
  "name": "harmonic",
  "dim": 2,
  "vars": ["p", "q"],
  "components": [[{"coef": -1, "powers": [0, 1]}], [{"coef": 1, "powers": [1, 0]}]]
}"#;

pub struct Loaded {
    pub system: System,
    pub default_box: Option<BoxRegion>,
}

fn builtin(name: &str) -> Option<(&'static str, &'static str)> {
    match name {
        "lorenz" => Some((LORENZ, "-30,30;-30,30;0,60")),
        "logistic" => Some((LOGISTIC, "-1,2")),
        "harmonic" => Some((HARMONIC, "-2,2;-2,2")),
        _ => None,
    }
}

pub fn load(args: &SystemArgs) -> Result<Loaded, CliError> {
    let (text, default_box) = match builtin(&args.system) {
        Some((json, b)) => (json.to_string(), Some(b.parse::<BoxRegion>()?)),
        None => {
            let text = std::fs::read_to_string(&args.system)
                .map_err(|e| CliError::Input(format!("cannot read system `{}`: {e}", args.system)))?;
            (text, None)
        }
    };
    let spec = SystemSpec::from_json(&text)?;
    let mut overrides = BTreeMap::new();
    for p in &args.params {
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| CliError::Input(format!("--param expects NAME=VALUE, got `{p}`")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| CliError::Input(format!("--param {k}: `{v}` is not a number")))?;
        overrides.insert(k.trim().to_string(), v);
    }
    for (name, v) in [("alpha", args.alpha), ("sigma", args.sigma), ("rho", args.rho), ("beta", args.beta)] {
        if let Some(v) = v {
            if !spec.params.contains_key(name) {
                return Err(CliError::Input(format!(
                    "--{name} does not apply to system `{}`",
                    args.system
                )));
            }
            overrides.insert(name.to_string(), v);
        }
    }
    Ok(Loaded {
        system: spec.load(&overrides)?,
        default_box,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use pfdyn_core::models;

    fn args(system: &str) -> SystemArgs {
        SystemArgs {
            system: system.into(),
            params: vec![],
            alpha: None,
            sigma: None,
            rho: None,
            beta: None,
            delta: "0.005".into(),
            tau: None,
        }
    }

    #[test]
    fn builtins_match_the_models() {
        let l = load(&args("lorenz")).unwrap();
        assert_eq!(l.system.field, models::lorenz(&models::LorenzParams::classic()));
        assert_eq!(load(&args("harmonic")).unwrap().system.field, models::harmonic());
        let mut a = args("logistic");
        a.alpha = Some(2.5);
        assert_eq!(load(&a).unwrap().system.field, models::logistic(2.5));
    }

    #[test]
    fn bad_overrides() {
        let mut a = args("harmonic");
        a.sigma = Some(1.0);
        assert!(load(&a).is_err());
        let mut a = args("lorenz");
        a.params = vec!["rho".into()];
        assert!(load(&a).is_err());
        assert!(load(&args("/no/such/file.json")).is_err());
    }
}
