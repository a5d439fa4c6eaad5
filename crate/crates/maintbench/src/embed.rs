//! Sentence embeddings for semantic de-duplication.
//!
//! Wire format of the HTTP embedder:
//!
//! ```text
//! POST <endpoint>
//! {"texts": ["...", "..."], "model": "optional"}
//! 200 {"embeddings": [[0.1, ...], [0.3, ...]]}
//! ```
//!
//! Vectors are L2-normalized locally whatever the endpoint returns.

use std::time::Duration;

use maintbench_core::cluster::{hash_embedding, EmbeddingVector};
use maintbench_core::ratelimit::{classify_status, Backoff, ErrorClass};
use serde::{Deserialize, Serialize};

use crate::config::{EmbeddingKind, EmbeddingSection};
use crate::error::{Error, Result};

#[derive(Debug, Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [String],
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<&'a str>,
}

#[derive(Debug, Deserialize)]
struct EmbedResponse {
    embeddings: Vec<Vec<f64>>,
}

pub async fn embed_corpus(texts: &[String], section: &EmbeddingSection) -> Result<Vec<EmbeddingVector>> {
    match section.kind {
        EmbeddingKind::Mock => Ok(texts.iter().map(|t| hash_embedding(t, section.dimension)).collect()),
        EmbeddingKind::Http => embed_http(texts, section).await,
    }
}

async fn embed_http(texts: &[String], section: &EmbeddingSection) -> Result<Vec<EmbeddingVector>> {
    let endpoint = section.endpoint.as_deref().ok_or_else(|| Error::Config("embedding endpoint missing".into()))?;
    let key = match &section.auth {
        Some(var) => {
            Some(std::env::var(var).map_err(|_| Error::MissingAuth { model: "embedding".into(), var: var.clone() })?)
        }
        None => None,
    };
    let client = reqwest::Client::builder()
        .timeout(Duration::from_secs(120))
        .build()
        .map_err(|e| Error::Embedding(e.to_string()))?;
    let backoff = Backoff::new(Duration::from_secs(1));
    let mut out = Vec::with_capacity(texts.len());
    for batch in texts.chunks(section.batch_size) {
        let body = EmbedRequest { texts: batch, model: section.model.as_deref() };
        let mut attempt = 0;
        let vectors = loop {
            attempt += 1;
            let mut req = client.post(endpoint).json(&body);
            if let Some(k) = &key {
                req = req.bearer_auth(k);
            }
            let retry = match req.send().await {
                Ok(resp) if resp.status().is_success() => {
                    let parsed: EmbedResponse =
                        resp.json().await.map_err(|e| Error::Embedding(format!("malformed response: {e}")))?;
                    break parsed.embeddings;
                }
                Ok(resp) => {
                    let status = resp.status().as_u16();
                    let text = resp.text().await.unwrap_or_default();
                    match classify_status(status, &text) {
                        ErrorClass::Retryable => format!("HTTP {status}"),
                        ErrorClass::Fatal(_) => return Err(Error::Embedding(format!("HTTP {status}: {text}"))),
                    }
                }
                Err(e) if e.is_timeout() || e.is_connect() => e.to_string(),
                Err(e) => return Err(Error::Embedding(e.to_string())),
            };
            if attempt > section.max_retries {
                return Err(Error::Embedding(format!("gave up after {attempt} attempts: {retry}")));
            }
            tokio::time::sleep(backoff.delay(attempt)).await;
        };
        if vectors.len() != batch.len() {
            return Err(Error::Embedding(format!(
                "endpoint returned {} vectors for a batch of {}",
                vectors.len(),
                batch.len()
            )));
        }
        for v in vectors {
            if v.len() != section.dimension {
                return Err(Error::Embedding(format!(
                    "dimension mismatch: expected {}, got {}",
                    section.dimension,
                    v.len()
                )));
            }
            out.push(EmbeddingVector::normalized(v).map_err(|e| Error::Embedding(e.to_string()))?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use axum::routing::post;
    use axum::{Json, Router};

    async fn serve(router: Router) -> String {
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        tokio::spawn(async move { axum::serve(listener, router).await.unwrap() });
        format!("http://{addr}/embed")
    }

    fn section(endpoint: String, dimension: usize) -> EmbeddingSection {
        EmbeddingSection {
            kind: EmbeddingKind::Http,
            endpoint: Some(endpoint),
            dimension,
            batch_size: 2,
            ..EmbeddingSection::default()
        }
    }

    /// Reference server: vector of text length and a constant.
    async fn reference(Json(v): Json<serde_json::Value>) -> Json<serde_json::Value> {
        let texts = v["texts"].as_array().unwrap();
        let embeddings: Vec<Vec<f64>> = texts.iter().map(|t| vec![t.as_str().unwrap().len() as f64, 3.0]).collect();
        Json(serde_json::json!({ "embeddings": embeddings }))
    }

    #[tokio::test]
    async fn http_vectors_are_normalized_in_order() {
        let url = serve(Router::new().route("/embed", post(reference))).await;
        let texts: Vec<String> = ["abcd", "", "abcd", "x"].iter().map(|s| s.to_string()).collect();
        let v = embed_corpus(&texts, &section(url, 2)).await.unwrap();
        assert_eq!(v.len(), 4);
        assert!((v[0].values()[0] - 0.8).abs() < 1e-12);
        assert_eq!(v[0], v[2]);
        assert_eq!(v[1].values(), &[0.0, 1.0]);
    }

    #[tokio::test]
    async fn wrong_dimension_aborts() {
        let url = serve(Router::new().route("/embed", post(reference))).await;
        let texts = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        let e = embed_corpus(&texts, &section(url, 3)).await.unwrap_err();
        assert!(e.to_string().contains("dimension mismatch"), "{e}");
    }

    #[tokio::test]
    async fn mock_is_stable() {
        let texts = vec!["same".to_string(), "same".to_string()];
        let s = EmbeddingSection::default();
        let a = embed_corpus(&texts, &s).await.unwrap();
        assert_eq!(a[0], a[1]);
        assert_eq!(a, embed_corpus(&texts, &s).await.unwrap());
    }
}
