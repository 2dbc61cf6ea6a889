//! Live network I/O behind the [`Transport`](crate::replay::Transport) trait.
//!
//! This is the only module that opens sockets. It is private: everything
//! else reaches the network through a [`FixtureStore`](crate::replay::FixtureStore),
//! which holds a `LiveTransport` only in record and live modes.
//!
//! Design points worth knowing:
//!
//! * HTTP requests never auto-follow redirects. Each hop must be a separate
//!   transaction so redirect chains are visible in archives and count
//!   against fetch budgets hop by hop.
//! * TLS handshakes use a verifier that accepts any certificate. The goal
//!   is to capture the leaf the server presents, including expired or
//!   self-signed ones, not to authenticate the peer. Nothing is sent over
//!   the connection after the handshake.
//! * Search queries hit a configurable JSON endpoint. The API credential is
//!   read from an environment variable at query time and travels only in a
//!   request header, so it can never end up inside a fixture archive.

use std::io::Read;
use std::net::{TcpStream, ToSocketAddrs};
use std::sync::Arc;
use std::time::Duration;

use rustls::client::danger::{HandshakeSignatureValid, ServerCertVerified, ServerCertVerifier};
use rustls::pki_types::{CertificateDer, ServerName, UnixTime};
use rustls::{DigitallySignedStruct, SignatureScheme};

use crate::replay::{HttpOutcome, HttpRequest, Payload, SearchOutcome, TlsOutcome, Transport, WhoisOutcome};

/// Cap on HTTP body bytes read; policy pages are text, anything larger is
/// not something the pipeline can use.
const MAX_BODY_BYTES: u64 = 8 * 1024 * 1024;
/// Cap on WHOIS response bytes; real responses are a few KB.
const MAX_WHOIS_BYTES: u64 = 512 * 1024;

#[derive(Debug, Clone)]
pub struct SearchProvider {
    /// Endpoint queried with a `q` parameter, e.g. `https://search.example/v1?q=...`.
    pub endpoint: String,
    /// Name of the environment variable holding the API credential. The
    /// credential itself never appears in configuration or archives.
    pub api_key_env: String,
}

#[derive(Debug, Clone)]
pub struct TransportConfig {
    pub http_timeout: Duration,
    pub whois_timeout: Duration,
    pub tls_timeout: Duration,
    pub user_agent: String,
    pub search: Option<SearchProvider>,
}

impl Default for TransportConfig {
    fn default() -> Self {
        TransportConfig {
            http_timeout: Duration::from_secs(20),
            whois_timeout: Duration::from_secs(10),
            tls_timeout: Duration::from_secs(10),
            user_agent: concat!("domorg/", env!("CARGO_PKG_VERSION")).to_string(),
            search: None,
        }
    }
}

pub struct LiveTransport {
    agent: ureq::Agent,
    config: TransportConfig,
}

impl LiveTransport {
    pub fn new(config: TransportConfig) -> LiveTransport {
        let agent_config = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .max_redirects(0)
            .max_redirects_will_error(false)
            .timeout_global(Some(config.http_timeout))
            .user_agent(config.user_agent.clone())
            .build();
        LiveTransport {
            agent: ureq::Agent::new_with_config(agent_config),
            config,
        }
    }
}

impl Transport for LiveTransport {
    fn http(&self, request: &HttpRequest) -> HttpOutcome {
        if !request.method.eq_ignore_ascii_case("GET") {
            return HttpOutcome::TransportFailure {
                reason: format!("unsupported method {}", request.method),
            };
        }
        let mut builder = self.agent.get(&request.url);
        for (name, value) in &request.headers {
            builder = builder.header(name.as_str(), value.as_str());
        }
        match builder.call() {
            Ok(mut response) => {
                let status = response.status().as_u16();
                let headers: Vec<(String, String)> = response
                    .headers()
                    .iter()
                    .map(|(name, value)| {
                        (
                            name.as_str().to_string(),
                            String::from_utf8_lossy(value.as_bytes()).into_owned(),
                        )
                    })
                    .collect();
                match response
                    .body_mut()
                    .with_config()
                    .limit(MAX_BODY_BYTES)
                    .read_to_vec()
                {
                    Ok(bytes) => HttpOutcome::Response {
                        status,
                        headers,
                        body: Payload::from_bytes(&bytes),
                    },
                    Err(e) => HttpOutcome::TransportFailure {
                        reason: format!("body read failed: {e}"),
                    },
                }
            }
            Err(ureq::Error::Timeout(_)) => HttpOutcome::Timeout,
            Err(e) => HttpOutcome::TransportFailure {
                reason: e.to_string(),
            },
        }
    }

    fn tls(&self, host: &str, port: u16) -> TlsOutcome {
        match capture_leaf(host, port, self.config.tls_timeout) {
            Ok(der) => TlsOutcome::Leaf { der },
            Err(TlsProbeError::Refused) => TlsOutcome::NoTls,
            Err(TlsProbeError::Failed(reason)) => TlsOutcome::HandshakeFailure { reason },
        }
    }

    fn whois(&self, server: &str, query: &str) -> WhoisOutcome {
        match whois_query(server, query, self.config.whois_timeout) {
            Ok(text) => WhoisOutcome::Response { text },
            Err(reason) => WhoisOutcome::TransportFailure { reason },
        }
    }

    fn search(&self, query: &str) -> SearchOutcome {
        let Some(provider) = &self.config.search else {
            return SearchOutcome::Unavailable {
                reason: "no search provider configured".into(),
            };
        };
        let mut builder = self.agent.get(&provider.endpoint).query("q", query);
        match std::env::var(&provider.api_key_env) {
            Ok(key) if !key.is_empty() => {
                builder = builder.header("authorization", format!("Bearer {key}"));
            }
            _ => {
                return SearchOutcome::Unavailable {
                    reason: format!("environment variable {} is not set", provider.api_key_env),
                };
            }
        }
        let mut response = match builder.call() {
            Ok(r) => r,
            Err(e) => {
                return SearchOutcome::Unavailable {
                    reason: e.to_string(),
                }
            }
        };
        if !response.status().is_success() {
            return SearchOutcome::Unavailable {
                reason: format!("search endpoint returned status {}", response.status()),
            };
        }
        let bytes = match response
            .body_mut()
            .with_config()
            .limit(MAX_BODY_BYTES)
            .read_to_vec()
        {
            Ok(b) => b,
            Err(e) => {
                return SearchOutcome::Unavailable {
                    reason: format!("body read failed: {e}"),
                }
            }
        };
        match parse_search_results(&bytes) {
            Some(urls) => SearchOutcome::Results { urls },
            None => SearchOutcome::Unavailable {
                reason: "unrecognized search response shape".into(),
            },
        }
    }
}

/// Extracts result URLs from a search response. Accepts either a bare JSON
/// array of URL strings or an object with a `results` array whose items are
/// URL strings or objects with a `url` field.
fn parse_search_results(bytes: &[u8]) -> Option<Vec<String>> {
    let value: serde_json::Value = serde_json::from_slice(bytes).ok()?;
    let items = match &value {
        serde_json::Value::Array(items) => items,
        serde_json::Value::Object(map) => map.get("results")?.as_array()?,
        _ => return None,
    };
    let mut urls = Vec::new();
    for item in items {
        match item {
            serde_json::Value::String(url) => urls.push(url.clone()),
            serde_json::Value::Object(map) => {
                if let Some(url) = map.get("url").and_then(|u| u.as_str()) {
                    urls.push(url.to_string());
                }
            }
            _ => {}
        }
    }
    Some(urls)
}

enum TlsProbeError {
    /// TCP connection refused: nothing listens on the port.
    Refused,
    Failed(String),
}

/// Performs a TLS handshake and returns the DER-encoded leaf certificate the
/// server presented. No certificate validation is performed and no
/// application data is exchanged.
fn capture_leaf(host: &str, port: u16, timeout: Duration) -> Result<Vec<u8>, TlsProbeError> {
    let addr = format!("{host}:{port}")
        .to_socket_addrs()
        .map_err(|e| TlsProbeError::Failed(format!("resolve failed: {e}")))?
        .next()
        .ok_or_else(|| TlsProbeError::Failed("host resolved to no addresses".into()))?;

    let mut tcp = match TcpStream::connect_timeout(&addr, timeout) {
        Ok(tcp) => tcp,
        Err(e) if e.kind() == std::io::ErrorKind::ConnectionRefused => {
            return Err(TlsProbeError::Refused)
        }
        Err(e) => return Err(TlsProbeError::Failed(format!("connect failed: {e}"))),
    };
    tcp.set_read_timeout(Some(timeout)).ok();
    tcp.set_write_timeout(Some(timeout)).ok();

    let tls_config = rustls::ClientConfig::builder()
        .dangerous()
        .with_custom_certificate_verifier(Arc::new(AcceptAnyCertificate))
        .with_no_client_auth();
    let server_name = ServerName::try_from(host.to_string())
        .map_err(|e| TlsProbeError::Failed(format!("bad server name: {e}")))?;
    let mut conn = rustls::ClientConnection::new(Arc::new(tls_config), server_name)
        .map_err(|e| TlsProbeError::Failed(format!("client setup failed: {e}")))?;

    while conn.is_handshaking() {
        if let Err(e) = conn.complete_io(&mut tcp) {
            return Err(TlsProbeError::Failed(format!("handshake failed: {e}")));
        }
    }
    let leaf = conn
        .peer_certificates()
        .and_then(|certs| certs.first())
        .ok_or_else(|| TlsProbeError::Failed("server presented no certificate".into()))?;
    Ok(leaf.as_ref().to_vec())
}

/// Accepts every certificate so the handshake completes and the leaf can be
/// inspected. Never use this for connections that carry data.
#[derive(Debug)]
struct AcceptAnyCertificate;

impl ServerCertVerifier for AcceptAnyCertificate {
    fn verify_server_cert(
        &self,
        _end_entity: &CertificateDer<'_>,
        _intermediates: &[CertificateDer<'_>],
        _server_name: &ServerName<'_>,
        _ocsp_response: &[u8],
        _now: UnixTime,
    ) -> Result<ServerCertVerified, rustls::Error> {
        Ok(ServerCertVerified::assertion())
    }

    fn verify_tls12_signature(
        &self,
        _message: &[u8],
        _cert: &CertificateDer<'_>,
        _dss: &DigitallySignedStruct,
    ) -> Result<HandshakeSignatureValid, rustls::Error> {
        Ok(HandshakeSignatureValid::assertion())
    }

    fn verify_tls13_signature(
        &self,
        _message: &[u8],
        _cert: &CertificateDer<'_>,
        _dss: &DigitallySignedStruct,
    ) -> Result<HandshakeSignatureValid, rustls::Error> {
        Ok(HandshakeSignatureValid::assertion())
    }

    fn supported_verify_schemes(&self) -> Vec<SignatureScheme> {
        vec![
            SignatureScheme::RSA_PKCS1_SHA256,
            SignatureScheme::RSA_PKCS1_SHA384,
            SignatureScheme::RSA_PKCS1_SHA512,
            SignatureScheme::RSA_PSS_SHA256,
            SignatureScheme::RSA_PSS_SHA384,
            SignatureScheme::RSA_PSS_SHA512,
            SignatureScheme::ECDSA_NISTP256_SHA256,
            SignatureScheme::ECDSA_NISTP384_SHA384,
            SignatureScheme::ECDSA_NISTP521_SHA512,
            SignatureScheme::ED25519,
        ]
    }
}

/// Speaks the classic WHOIS wire protocol: connect to port 43 (or whatever
/// `server` specifies), send the query terminated by CRLF, read everything
/// until the server closes the connection.
fn whois_query(server: &str, query: &str, timeout: Duration) -> Result<String, String> {
    use std::io::Write;

    let target = if server.contains(':') {
        server.to_string()
    } else {
        format!("{server}:43")
    };
    let addr = target
        .to_socket_addrs()
        .map_err(|e| format!("resolve failed: {e}"))?
        .next()
        .ok_or("host resolved to no addresses")?;
    let mut stream =
        TcpStream::connect_timeout(&addr, timeout).map_err(|e| format!("connect failed: {e}"))?;
    stream.set_read_timeout(Some(timeout)).ok();
    stream.set_write_timeout(Some(timeout)).ok();
    stream
        .write_all(format!("{query}\r\n").as_bytes())
        .map_err(|e| format!("write failed: {e}"))?;

    let mut buffer = Vec::new();
    let mut chunk = [0u8; 4096];
    loop {
        match stream.read(&mut chunk) {
            Ok(0) => break,
            Ok(n) => {
                buffer.extend_from_slice(&chunk[..n]);
                if buffer.len() as u64 > MAX_WHOIS_BYTES {
                    return Err("response exceeded size limit".into());
                }
            }
            // A timeout after data has arrived usually means the server
            // holds the connection open; take what we have.
            Err(e)
                if matches!(
                    e.kind(),
                    std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut
                ) && !buffer.is_empty() =>
            {
                break;
            }
            Err(e) => return Err(format!("read failed: {e}")),
        }
    }
    Ok(String::from_utf8_lossy(&buffer).into_owned())
}
