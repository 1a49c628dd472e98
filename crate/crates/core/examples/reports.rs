//! Benchmark reports: run, merge, export.

use mpc_prompt::bench::*;

fn main() -> mpc_prompt::error::Result<()> {
    let protocols = cmd_bench_protocols(&ProtocolBenchConfig {
        sizes: vec![1, 64],
        ops: vec!["mul".into(), "cosine".into()],
        ..Default::default()
    })?;
    let attention = cmd_bench_attention(&AttentionBenchConfig { n: vec![16, 32, 64], m: 64, ..Default::default() })?;
    let merged = BenchmarkReport::merge(&[protocols, attention])?;
    print!("{}", merged.to_csv()?);
    for (k, v) in &merged.metrics {
        println!("{k} = {v:.3}");
    }
    let dir = std::env::temp_dir().join("mpc-prompt-report");
    merged.write(&dir)?;
    if let Some(svg) = merged.bytes_plot_svg() {
        std::fs::write(dir.join("bytes.svg"), svg)?;
    }
    println!("wrote {}", dir.display());
    Ok(())
}
