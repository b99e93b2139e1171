//! `hubctl serve` as a child process on ephemeral ports.

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};

pub fn hubctl() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hubctl"))
}

/// Config with a static identity for `users` (assertion `name:pw-name`).
pub fn write_config(dir: &Path, users: &[&str]) -> PathBuf {
    let mut text = format!(
        "storage_root = {:?}\ndriver = \"sim\"\napi_port = 0\nproxy_port = 0\nroute_cookie_secret = \"test-secret\"\n\n[identity]\nkind = \"static\"\nauto_provision = true\n\n[identity.tokens]\n",
        dir.join("data")
    );
    for u in users {
        text.push_str(&format!("{u} = \"pw-{u}\"\n"));
    }
    let path = dir.join("hub.toml");
    std::fs::write(&path, text).unwrap();
    path
}

pub struct Served {
    pub child: Child,
    pub api: String,
    pub proxy: String,
}

impl Served {
    pub fn spawn(config: &Path) -> Served {
        let mut child = hubctl()
            .arg("--config")
            .arg(config)
            .arg("serve")
            .env("HUB_LOG", "warn")
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .unwrap();
        let mut lines = BufReader::new(child.stdout.take().unwrap()).lines();
        let mut addr = |prefix: &str| {
            let line = lines.next().expect("serve exited early").unwrap();
            format!("http://{}", line.strip_prefix(prefix).unwrap_or_else(|| panic!("unexpected line {line:?}")))
        };
        let api = addr("api listening on ");
        let proxy = addr("proxy listening on ");
        Served { child, api, proxy }
    }

    /// SIGKILL: no shutdown hooks run.
    pub fn kill(mut self) {
        self.child.kill().unwrap();
        self.child.wait().unwrap();
    }
}

impl Drop for Served {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
