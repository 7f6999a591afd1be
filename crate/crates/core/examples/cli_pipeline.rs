//! The four subcommands end to end on a tiny dataset, driven in-process.

use deinterleave::cli::run;

fn main() -> deinterleave::Result<()> {
    let root = std::env::temp_dir().join("deinterleave-example-cli");
    if root.exists() {
        std::fs::remove_dir_all(&root).map_err(|e| deinterleave::Error::io(&root, e))?;
    }
    let p = |name: &str| root.join(name).to_string_lossy().into_owned();
    let cli = |args: &[&str]| run(std::iter::once("deinterleave").chain(args.iter().copied()));

    cli(&[
        "generate",
        "--out",
        &p("data"),
        "--n-trains",
        "40",
        "--n-val",
        "10",
        "--n-test",
        "10",
    ])?;
    cli(&[
        "train",
        "--model",
        "gru",
        "--data",
        &p("data"),
        "--out",
        &p("gru"),
        "--epochs",
        "2",
    ])?;
    let ckpt = root.join("gru/best.ckpt").to_string_lossy().into_owned();
    cli(&[
        "evaluate",
        "--checkpoint",
        &ckpt,
        "--data",
        &p("data"),
        "--out",
        &p("eval"),
    ])?;
    cli(&[
        "sweep",
        "--checkpoint",
        &ckpt,
        "--data",
        &p("data"),
        "--out",
        &p("sweep"),
        "--grid",
        "3,5,10",
    ])?;
    println!("outputs under {}", root.display());
    Ok(())
}
