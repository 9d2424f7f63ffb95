use std::sync::Mutex;
use std::time::Duration;

use super::{check_rates, Extractor};
use crate::error::{BackendError, Result};
use crate::protocol::WorkerClient;
use crate::signal::Waveform;

/// Extractor served by a worker process. One process per handle; calls are
/// serialized through a mutex, so the handle reports itself as not
/// concurrent-safe.
#[derive(Debug)]
pub struct ExternalExtractor {
    client: Mutex<WorkerClient>,
}

impl ExternalExtractor {
    pub fn spawn(command: &[String], timeout: Duration) -> Result<Self> {
        let client = WorkerClient::spawn(command, timeout)?;
        if !client.supports("extract") {
            return Err(BackendError::UnsupportedOp("extract".into()).into());
        }
        Ok(Self {
            client: Mutex::new(client),
        })
    }
}

impl Extractor for ExternalExtractor {
    fn name(&self) -> &str {
        "external"
    }

    fn extract(&self, input: &Waveform, enrollment: &Waveform) -> Result<Waveform> {
        check_rates(input, enrollment)?;
        let mut client = self.client.lock().unwrap_or_else(|p| p.into_inner());
        let out = client.extract(&input.to_f32(), &enrollment.to_f32(), input.sample_rate())?;
        Waveform::from_f32(&out, input.sample_rate())
            .map_err(|e| BackendError::Protocol(format!("worker returned an invalid waveform: {e}")).into())
    }

    fn concurrent_safe(&self) -> bool {
        false
    }
}
