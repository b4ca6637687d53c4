use irsnoma_cli::config::parse_config;
use irsnoma_cli::experiment::sweep_points;

#[test]
fn shipped_configs_parse() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut n = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = parse_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert!(!sweep_points(&cfg).is_empty(), "{}", path.display());
        n += 1;
    }
    assert_eq!(n, 3);
}

#[test]
fn passive_objective_is_configurable() {
    use irsnoma::passive::PassiveObjective;
    use irsnoma_cli::config::ExperimentConfig;
    let base = "[dims]\nnt = 2\nm = 2\nne = 1\n";
    assert_eq!(ExperimentConfig::from_toml(base).unwrap().passive_objective, PassiveObjective::SlackMargin);
    let find = format!("passive_objective = \"find\"\n{base}");
    assert_eq!(ExperimentConfig::from_toml(&find).unwrap().passive_objective, PassiveObjective::Find);
    assert!(ExperimentConfig::from_toml(&format!("passive_objective = \"best\"\n{base}")).is_err());
}
