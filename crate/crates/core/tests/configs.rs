use crl_core::corpus::GrammarSpec;
use crl_core::diffkernel::OptimKind;
use crl_core::trainer::{Objective, TrainConfig};
use std::path::PathBuf;

fn read(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn shipped_grammar_is_the_default() {
    assert_eq!(GrammarSpec::from_toml_str(&read("grammar.toml")).unwrap(), GrammarSpec::default());
}

#[test]
fn shipped_train_configs() {
    let crl = TrainConfig::from_toml_str(&read("train.toml")).unwrap();
    let without_paths = |c: &TrainConfig| TrainConfig {
        train_data: None,
        val_data: None,
        vocab: None,
        checkpoint_dir: None,
        report_path: None,
        ..c.clone()
    };
    let expected = TrainConfig {
        optimizer: OptimKind::Adam,
        lr: 3e-3,
        ..TrainConfig::default()
    };
    assert_eq!(without_paths(&crl), expected);

    let xe = TrainConfig::from_toml_str(&read("train_xe.toml")).unwrap();
    assert_eq!(
        without_paths(&xe),
        TrainConfig {
            objective: Objective::XeOnly,
            delta: 1.0,
            ..expected
        }
    );
}
