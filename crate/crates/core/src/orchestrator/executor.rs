//! Remote configuration executors: run a command string on the SUT and
//! report exit status and output.

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::process::Command;
use std::rc::Rc;

use thiserror::Error;

use super::config::Connection;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExecError {
    #[error("transport failure: {0}")]
    Transport(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandOutput {
    pub status: i32,
    pub output: String,
}

impl CommandOutput {
    pub fn ok(output: impl Into<String>) -> Self {
        Self {
            status: 0,
            output: output.into(),
        }
    }

    pub fn success(&self) -> bool {
        self.status == 0
    }
}

pub trait ConfigExecutor {
    fn execute(&mut self, command: &str) -> Result<CommandOutput, ExecError>;
}

/// Shared, ordered record of events. Executors and test drivers can write
/// into the same log to check interleaving.
pub type EventLog = Rc<RefCell<Vec<String>>>;

/// Records commands instead of running them. Commands containing the
/// `fail_on` pattern return exit status 1.
#[derive(Debug, Default, Clone)]
pub struct RecordingExecutor {
    log: EventLog,
    fail_on: Option<String>,
}

impl RecordingExecutor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_log(log: EventLog) -> Self {
        Self { log, fail_on: None }
    }

    pub fn failing_on(mut self, pattern: impl Into<String>) -> Self {
        self.fail_on = Some(pattern.into());
        self
    }

    pub fn log(&self) -> EventLog {
        Rc::clone(&self.log)
    }

    pub fn commands(&self) -> Vec<String> {
        self.log.borrow().clone()
    }
}

impl ConfigExecutor for RecordingExecutor {
    fn execute(&mut self, command: &str) -> Result<CommandOutput, ExecError> {
        self.log.borrow_mut().push(command.to_string());
        match &self.fail_on {
            Some(p) if command.contains(p.as_str()) => Ok(CommandOutput {
                status: 1,
                output: format!("refused: {command}"),
            }),
            _ => Ok(CommandOutput::ok("")),
        }
    }
}

/// Interprets the simulated forwarder's configuration commands:
/// `sim configure behavior=<B> sid=<SID>` and `sim clear behavior=<B>`.
#[derive(Debug, Default, Clone)]
pub struct SimExecutor {
    configured: BTreeSet<String>,
}

impl SimExecutor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn configured(&self) -> impl Iterator<Item = &str> {
        self.configured.iter().map(String::as_str)
    }
}

fn fail(msg: impl Into<String>) -> CommandOutput {
    CommandOutput {
        status: 1,
        output: msg.into(),
    }
}

impl ConfigExecutor for SimExecutor {
    fn execute(&mut self, command: &str) -> Result<CommandOutput, ExecError> {
        let words: Vec<&str> = command.split_whitespace().collect();
        let arg = |key: &str| {
            words
                .iter()
                .find_map(|w| w.strip_prefix(key).and_then(|v| v.strip_prefix('=')))
        };
        Ok(match words.get(..2) {
            Some(["sim", "configure"]) => match (arg("behavior"), arg("sid")) {
                (Some(b), Some(_)) if self.configured.insert(b.to_string()) => CommandOutput::ok(""),
                (Some(b), Some(_)) => fail(format!("{b} already configured")),
                _ => fail(format!("usage: sim configure behavior=<B> sid=<SID>; got `{command}`")),
            },
            Some(["sim", "clear"]) => match arg("behavior") {
                Some(b) if self.configured.remove(b) => CommandOutput::ok(""),
                Some(b) => fail(format!("{b} not configured")),
                None => fail(format!("usage: sim clear behavior=<B>; got `{command}`")),
            },
            _ => fail(format!("unknown command `{command}`")),
        })
    }
}

/// Runs commands through the system `ssh` client in batch mode.
#[derive(Debug, Clone)]
pub struct SshExecutor {
    connection: Connection,
}

impl SshExecutor {
    pub fn new(connection: Connection) -> Self {
        Self { connection }
    }

    /// Arguments passed to `ssh` for `command`.
    pub fn ssh_args(&self, command: &str) -> Vec<String> {
        let c = &self.connection;
        let mut args = vec!["-o".into(), "BatchMode=yes".into(), "-p".into(), c.port.to_string()];
        if let Some(id) = &c.identity_file {
            args.push("-i".into());
            args.push(id.display().to_string());
        }
        for o in &c.ssh_options {
            args.push("-o".into());
            args.push(o.clone());
        }
        args.push(format!("{}@{}", c.user, c.host));
        args.push("--".into());
        args.push(match &c.command_prefix {
            Some(p) => format!("{p} {command}"),
            None => command.to_string(),
        });
        args
    }
}

impl ConfigExecutor for SshExecutor {
    fn execute(&mut self, command: &str) -> Result<CommandOutput, ExecError> {
        let out = Command::new("ssh")
            .args(self.ssh_args(command))
            .output()
            .map_err(|e| ExecError::Transport(format!("cannot run ssh: {e}")))?;
        // ssh itself exits with 255 on connection errors
        if out.status.code() == Some(255) {
            return Err(ExecError::Transport(
                String::from_utf8_lossy(&out.stderr).trim().to_string(),
            ));
        }
        let mut output = String::from_utf8_lossy(&out.stdout).into_owned();
        output.push_str(&String::from_utf8_lossy(&out.stderr));
        Ok(CommandOutput {
            status: out.status.code().unwrap_or(-1),
            output,
        })
    }
}
