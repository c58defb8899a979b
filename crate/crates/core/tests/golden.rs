//! Golden outputs for the example corpus. Set `HYGEX_BLESS=1` to rewrite
//! the expected files after an intended change.

use std::path::{Path, PathBuf};

use hygex::driver::{run_source, with_big_stack, RunConfig};
use hygex::expander::{ExpanderConfig, Stage};

fn examples() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples")
}

fn check(file: &str, stage: Stage) {
    let src = std::fs::read_to_string(examples().join(file)).unwrap();
    let cfg = RunConfig {
        expander: ExpanderConfig {
            stage,
            trace_expansion: true,
            trace_tactics: true,
            ..ExpanderConfig::default()
        },
        no_prelude: false,
    };
    let name = file.to_string();
    let got = with_big_stack(move || run_source(&src, &name, &cfg).combined());
    let suffix = match stage {
        Stage::Expand => "expand",
        Stage::Elaborate => "elaborate",
    };
    let stem = Path::new(file).file_stem().unwrap().to_string_lossy();
    let golden = examples().join("golden").join(format!("{stem}.{suffix}.txt"));
    if std::env::var_os("HYGEX_BLESS").is_some() {
        std::fs::create_dir_all(golden.parent().unwrap()).unwrap();
        std::fs::write(&golden, &got).unwrap();
        return;
    }
    let want = std::fs::read_to_string(&golden).unwrap_or_else(|e| panic!("{}: {e}", golden.display()));
    assert_eq!(got, want, "output of {file} differs from {}", golden.display());
}

macro_rules! golden {
    ($($name:ident: $file:literal, $stage:ident;)*) => {
        $(
            #[test]
            fn $name() {
                check($file, Stage::$stage);
            }
        )*
    };
}

golden! {
    const_expand: "const.lean", Expand;
    macro_macro_expand: "macro-macro.lean", Expand;
    tuples_expand: "tuples.lean", Expand;
    funmatch_expand: "funmatch.lean", Expand;
    bigop_expand: "bigop.lean", Expand;
    precheck_expand: "precheck.lean", Expand;
    tactics_expand: "tactics.lean", Expand;
    tactics_elaborate: "tactics.lean", Elaborate;
    elab_expand: "elab.lean", Expand;
    elab_elaborate: "elab.lean", Elaborate;
    tuples_elaborate: "tuples.lean", Elaborate;
}
