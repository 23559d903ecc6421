// Driving the command-line front end in-process.

use ptlab::cli::dispatch;

pub fn run_example() -> ptlab::Result<()> {
    let out = std::env::temp_dir().join(format!("ptlab-cli-example-{}", std::process::id()));
    let out = out.display().to_string();
    let runs: [&[&str]; 3] = [
        &["bounds", "--scheme", "nrpt", "--N", "6", "--r", "0.46", "--tmax", "25"],
        &["laplace", "--lambda", "1,2", "--table"],
        &[
            "sample",
            "--model",
            "gaussian",
            "--N",
            "4",
            "--iterations",
            "200",
            "--schedule",
            "uniform",
        ],
    ];
    for args in runs {
        let argv = std::iter::once("ptlab")
            .chain(args.iter().copied())
            .chain(["--out", out.as_str()]);
        let code = dispatch(argv);
        assert_eq!(code, 0, "{args:?}");
    }
    let _ = std::fs::remove_dir_all(&out);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
