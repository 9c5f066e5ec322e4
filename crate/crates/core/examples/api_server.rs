//! Serves the HTTP API over a data root seeded with synthetic scenes.
//!
//! cargo run --example api_server -- <data-root> [port]
//!
//! Then, for example:
//!   curl localhost:8080/api/defects
//!   curl -F files=@scene_0000.png -F files=@scene_0000.geo.json localhost:8080/api/uploads

use std::sync::Arc;

use roadatlas::api::{router, AppState, JobRunner};
use roadatlas::ingest::{ingest, scan_dir};
use roadatlas::pipeline::Models;
use roadatlas::store::Store;
use roadatlas::synthetic::{street_rig, write_scene_dir};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let root = args.next().ok_or("usage: api_server <data-root> [port]")?;
    let port: u16 = args.next().map(|p| p.parse()).transpose()?.unwrap_or(8080);

    let store = Arc::new(Store::open(&root)?);
    let cfg = Arc::new(street_rig());
    if store.images().is_empty() {
        let dir = std::path::Path::new(&root).join("scenes");
        write_scene_dir(&dir, 0..3)?;
        for item in scan_dir(&dir)? {
            ingest(&store, &item.map_err(|u| u.error)?, &Models::fallback(&cfg), &cfg)?;
        }
    }

    let jobs = JobRunner::new(Arc::clone(&store), Models::fallback(&cfg), Arc::clone(&cfg))?;
    jobs.start();
    let app = router(AppState { store, cfg, jobs: Arc::clone(&jobs) });
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(("127.0.0.1", port)).await?;
        println!("listening on http://{}", listener.local_addr()?);
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    })?;
    jobs.shutdown();
    Ok(())
}
