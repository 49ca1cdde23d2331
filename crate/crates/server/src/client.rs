//! Server-side client for the coordinator HTTP API.

use labgrader_core::domain::JobId;
use labgrader_core::protocol::{ArtifactArchive, ErrorBody, GradingJob, HealthBody, JobStatusBody};
use reqwest::StatusCode;
use serde::de::DeserializeOwned;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("coordinator unreachable: {0}")]
    Unreachable(String),
    #[error("coordinator is busy")]
    Busy,
    #[error("coordinator answered {status}: {detail}")]
    Status { status: u16, detail: String },
    #[error("undecodable coordinator response: {0}")]
    Decode(String),
}

#[derive(Clone)]
pub struct CoordinatorClient {
    http: reqwest::Client,
    base: String,
    token: String,
}

impl CoordinatorClient {
    pub fn new(http: reqwest::Client, base: &str, token: &str) -> Self {
        Self {
            http,
            base: base.trim_end_matches('/').to_owned(),
            token: token.to_owned(),
        }
    }

    async fn send(&self, req: reqwest::RequestBuilder) -> Result<reqwest::Response, ClientError> {
        let resp = req
            .bearer_auth(&self.token)
            .send()
            .await
            .map_err(|e| ClientError::Unreachable(e.to_string()))?;
        if resp.status().is_success() {
            return Ok(resp);
        }
        let status = resp.status();
        let body = resp.text().await.unwrap_or_default();
        let parsed: Option<ErrorBody> = serde_json::from_str(&body).ok();
        if status == StatusCode::CONFLICT && parsed.as_ref().is_some_and(|b| b.error == "busy") {
            return Err(ClientError::Busy);
        }
        Err(ClientError::Status {
            status: status.as_u16(),
            detail: parsed.map_or(body, |b| format!("{}: {}", b.error, b.detail)),
        })
    }

    async fn json<T: DeserializeOwned>(resp: reqwest::Response) -> Result<T, ClientError> {
        resp.json().await.map_err(|e| ClientError::Decode(e.to_string()))
    }

    pub async fn health(&self) -> Result<HealthBody, ClientError> {
        let resp = self.send(self.http.get(format!("{}/health", self.base))).await?;
        Self::json(resp).await
    }

    pub async fn post_job(&self, job: &GradingJob) -> Result<(), ClientError> {
        self.send(self.http.post(format!("{}/jobs", self.base)).json(job)).await?;
        Ok(())
    }

    pub async fn job_status(&self, id: JobId) -> Result<JobStatusBody, ClientError> {
        let resp = self.send(self.http.get(format!("{}/jobs/{id}", self.base))).await?;
        Self::json(resp).await
    }

    pub async fn artifacts(&self, id: JobId) -> Result<ArtifactArchive, ClientError> {
        let resp = self.send(self.http.get(format!("{}/jobs/{id}/artifacts", self.base))).await?;
        Self::json(resp).await
    }

    pub async fn release(&self, id: JobId) -> Result<(), ClientError> {
        self.send(self.http.delete(format!("{}/jobs/{id}", self.base))).await?;
        Ok(())
    }
}
