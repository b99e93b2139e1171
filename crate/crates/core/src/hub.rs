use std::path::Path;
use std::sync::Arc;

use crate::error::Result;
use crate::layout::Layout;
use crate::store::{State, Store};

#[derive(Debug, Clone)]
pub struct HubOptions {
    /// Per-user cap on notebook containers.
    pub max_containers_per_user: usize,
    /// Image used when a container attaches no project.
    pub default_image: String,
    /// Image that serves `served_app` reports.
    pub report_app_image: String,
}

impl Default for HubOptions {
    fn default() -> Self {
        HubOptions {
            max_containers_per_user: 4,
            default_image: "hub/notebook-base:latest".into(),
            report_app_image: "hub/report-app:latest".into(),
        }
    }
}

/// Domain facade: one store, one storage root. Operations live in the
/// `registry`, `collab`, `containers` and `reports` modules.
#[derive(Debug)]
pub struct Hub {
    pub(crate) store: Store,
    pub(crate) layout: Layout,
    pub(crate) options: HubOptions,
}

impl Hub {
    /// Opens (or initializes) the hub rooted at `root`, persisting to `<root>/state.json`.
    pub fn open(root: impl AsRef<Path>, options: HubOptions) -> Result<Self> {
        let layout = Layout::new(root.as_ref());
        std::fs::create_dir_all(layout.root())?;
        let store = Store::open(layout.snapshot_file())?;
        Ok(Hub { store, layout, options })
    }

    /// Hub whose state lives only in memory; content still goes under `root`.
    pub fn ephemeral(root: impl AsRef<Path>, options: HubOptions) -> Self {
        Hub { store: Store::in_memory(), layout: Layout::new(root.as_ref()), options }
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn options(&self) -> &HubOptions {
        &self.options
    }

    pub fn state(&self) -> Arc<State> {
        self.store.snapshot()
    }
}
