fn main() {
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        std::process::exit(1);
    }
    std::process::exit(sppa_cli::run(std::env::args()));
}

/// `SPPA_THREADS=n` caps the worker pool; unset or 0 means one per core.
#[cfg(feature = "parallel")]
fn configure_threads() -> Result<(), String> {
    let n = match std::env::var("SPPA_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| format!("SPPA_THREADS must be a nonnegative integer, got `{v}`"))?,
        Err(_) => return Ok(()),
    };
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    Ok(())
}

#[cfg(not(feature = "parallel"))]
fn configure_threads() -> Result<(), String> {
    Ok(())
}
