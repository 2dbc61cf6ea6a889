//! TLS certificate inspection.
//!
//! Parses a DER-encoded leaf certificate into the fields attribution cares
//! about (subject organization and common name, SANs, policy OIDs, validity
//! window) and classifies the validation tier. Only certificates issued
//! under organization-validation or extended-validation policies carry a
//! vetted organization identity; a domain-validation certificate says
//! nothing about who operates the site, which is exactly why certificate
//! inspection serves as a comparison technique rather than a primary
//! attribution source.

use std::collections::HashSet;
use std::path::Path;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use x509_parser::prelude::*;

const BUNDLED_EV_OIDS: &str = include_str!("../data/ev_policy_oids.txt");

#[derive(Debug, Error)]
pub enum CertError {
    #[error("certificate is not valid DER: {0}")]
    Der(String),
    #[error("certificate has trailing data after the DER structure")]
    TrailingData,
}

/// How thoroughly the issuer vetted the subject's identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationTier {
    /// Issued under an extended-validation policy OID.
    ExtendedValidation,
    /// Subject carries a vetted organization name.
    OrganizationValidation,
    /// Only control of the domain was verified.
    DomainValidation,
}

impl ValidationTier {
    pub fn as_str(&self) -> &'static str {
        match self {
            ValidationTier::ExtendedValidation => "extended-validation",
            ValidationTier::OrganizationValidation => "organization-validation",
            ValidationTier::DomainValidation => "domain-validation",
        }
    }
}

/// Policy OIDs treated as extended-validation markers.
#[derive(Debug, Clone)]
pub struct EvPolicyList {
    oids: HashSet<String>,
}

static BUNDLED_EV: LazyLock<EvPolicyList> =
    LazyLock::new(|| EvPolicyList::parse(BUNDLED_EV_OIDS));

impl EvPolicyList {
    pub fn bundled() -> &'static EvPolicyList {
        &BUNDLED_EV
    }

    pub fn parse(text: &str) -> EvPolicyList {
        EvPolicyList {
            oids: text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_string)
                .collect(),
        }
    }

    pub fn from_file(path: &Path) -> std::io::Result<EvPolicyList> {
        Ok(EvPolicyList::parse(&std::fs::read_to_string(path)?))
    }

    pub fn contains(&self, oid: &str) -> bool {
        self.oids.contains(oid)
    }
}

/// The fields of a leaf certificate that matter for attribution.
///
/// Values are kept exactly as decoded; a subject organization that is
/// present but blank stays `Some("")` here so evidence reflects the
/// certificate faithfully. Use [`org_from_certificate`] for a cleaned-up
/// organization name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertificateSummary {
    pub subject_organization: Option<String>,
    pub subject_common_name: Option<String>,
    pub issuer_organization: Option<String>,
    pub issuer_common_name: Option<String>,
    pub san_dns_names: Vec<String>,
    pub policy_oids: Vec<String>,
    /// Validity bounds as Unix seconds.
    pub not_before: i64,
    pub not_after: i64,
    pub tier: ValidationTier,
}

/// Parses a DER-encoded certificate and classifies its validation tier.
pub fn summarize_certificate(
    der: &[u8],
    ev: &EvPolicyList,
) -> Result<CertificateSummary, CertError> {
    let (rem, cert) =
        X509Certificate::from_der(der).map_err(|e| CertError::Der(e.to_string()))?;
    if !rem.is_empty() {
        return Err(CertError::TrailingData);
    }

    let subject_organization = first_attribute(cert.subject().iter_organization());
    let subject_common_name = first_attribute(cert.subject().iter_common_name());
    let issuer_organization = first_attribute(cert.issuer().iter_organization());
    let issuer_common_name = first_attribute(cert.issuer().iter_common_name());

    let mut san_dns_names = Vec::new();
    if let Ok(Some(san)) = cert.subject_alternative_name() {
        for name in &san.value.general_names {
            if let GeneralName::DNSName(dns) = name {
                san_dns_names.push(dns.to_string());
            }
        }
    }

    let mut policy_oids = Vec::new();
    for ext in cert.extensions() {
        if let ParsedExtension::CertificatePolicies(policies) = ext.parsed_extension() {
            for policy in policies {
                policy_oids.push(policy.policy_id.to_id_string());
            }
        }
    }

    let tier = if policy_oids.iter().any(|oid| ev.contains(oid)) {
        ValidationTier::ExtendedValidation
    } else if subject_organization
        .as_deref()
        .is_some_and(|o| !o.trim().is_empty())
    {
        ValidationTier::OrganizationValidation
    } else {
        ValidationTier::DomainValidation
    };

    Ok(CertificateSummary {
        subject_organization,
        subject_common_name,
        issuer_organization,
        issuer_common_name,
        san_dns_names,
        policy_oids,
        not_before: cert.validity().not_before.timestamp(),
        not_after: cert.validity().not_after.timestamp(),
        tier,
    })
}

/// The organization named by the certificate, if it can be trusted to name
/// one: EV and OV certificates yield their subject organization, DV
/// certificates yield nothing, and a blank organization field counts as
/// absent.
pub fn org_from_certificate(summary: &CertificateSummary) -> Option<String> {
    match summary.tier {
        ValidationTier::DomainValidation => None,
        _ => summary
            .subject_organization
            .as_deref()
            .map(str::trim)
            .filter(|o| !o.is_empty())
            .map(str::to_string),
    }
}

fn first_attribute<'a>(
    mut iter: impl Iterator<Item = &'a AttributeTypeAndValue<'a>>,
) -> Option<String> {
    iter.next()
        .map(|attr| attr.as_str().map(str::to_string).unwrap_or_default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rcgen::{CertificateParams, CustomExtension, DnType, KeyPair};

    /// DER for a certificate-policies extension holding the given OIDs.
    fn policies_extension(oids: &[&[u64]]) -> CustomExtension {
        fn encode_oid(arcs: &[u64]) -> Vec<u8> {
            let mut body = vec![(arcs[0] * 40 + arcs[1]) as u8];
            for &arc in &arcs[2..] {
                let mut chunk = Vec::new();
                let mut v = arc;
                chunk.push((v & 0x7f) as u8);
                v >>= 7;
                while v > 0 {
                    chunk.push(((v & 0x7f) | 0x80) as u8);
                    v >>= 7;
                }
                chunk.reverse();
                body.extend_from_slice(&chunk);
            }
            let mut out = vec![0x06, body.len() as u8];
            out.extend_from_slice(&body);
            out
        }

        let mut infos = Vec::new();
        for arcs in oids {
            let oid = encode_oid(arcs);
            infos.push(0x30);
            infos.push(oid.len() as u8);
            infos.extend_from_slice(&oid);
        }
        let mut content = vec![0x30, infos.len() as u8];
        content.extend_from_slice(&infos);
        // 2.5.29.32 is the certificate-policies extension.
        CustomExtension::from_oid_content(&[2, 5, 29, 32], content)
    }

    fn make_cert(org: Option<&str>, policy: Option<&[u64]>) -> Vec<u8> {
        let mut params = CertificateParams::new(vec!["example.com".to_string()]).unwrap();
        params
            .distinguished_name
            .push(DnType::CommonName, "example.com");
        if let Some(org) = org {
            params.distinguished_name.push(DnType::OrganizationName, org);
        }
        if let Some(arcs) = policy {
            params.custom_extensions.push(policies_extension(&[arcs]));
        }
        let key = KeyPair::generate().unwrap();
        params.self_signed(&key).unwrap().der().to_vec()
    }

    #[test]
    fn reads_subject_fields_and_sans() {
        let der = make_cert(Some("Example Corp"), None);
        let summary = summarize_certificate(&der, EvPolicyList::bundled()).unwrap();
        assert_eq!(summary.subject_organization.as_deref(), Some("Example Corp"));
        assert_eq!(summary.subject_common_name.as_deref(), Some("example.com"));
        assert_eq!(summary.san_dns_names, vec!["example.com"]);
    }

    #[test]
    fn org_present_classifies_as_ov() {
        let der = make_cert(Some("Example Corp"), None);
        let summary = summarize_certificate(&der, EvPolicyList::bundled()).unwrap();
        assert_eq!(summary.tier, ValidationTier::OrganizationValidation);
        assert_eq!(org_from_certificate(&summary).as_deref(), Some("Example Corp"));
    }

    #[test]
    fn no_org_classifies_as_dv() {
        let der = make_cert(None, None);
        let summary = summarize_certificate(&der, EvPolicyList::bundled()).unwrap();
        assert_eq!(summary.tier, ValidationTier::DomainValidation);
        assert_eq!(org_from_certificate(&summary), None);
    }

    #[test]
    fn ev_policy_oid_classifies_as_ev() {
        // 2.23.140.1.1 is the CA/Browser Forum EV umbrella OID.
        let der = make_cert(Some("Example Corp"), Some(&[2, 23, 140, 1, 1]));
        let summary = summarize_certificate(&der, EvPolicyList::bundled()).unwrap();
        assert!(summary.policy_oids.contains(&"2.23.140.1.1".to_string()));
        assert_eq!(summary.tier, ValidationTier::ExtendedValidation);
    }

    #[test]
    fn non_ev_policy_oid_stays_ov() {
        // 2.23.140.1.2.2 marks ordinary organization validation.
        let der = make_cert(Some("Example Corp"), Some(&[2, 23, 140, 1, 2, 2]));
        let summary = summarize_certificate(&der, EvPolicyList::bundled()).unwrap();
        assert_eq!(summary.policy_oids, vec!["2.23.140.1.2.2"]);
        assert_eq!(summary.tier, ValidationTier::OrganizationValidation);
    }

    #[test]
    fn blank_org_yields_no_name_but_stays_visible() {
        let der = make_cert(Some("  "), None);
        let summary = summarize_certificate(&der, EvPolicyList::bundled()).unwrap();
        assert_eq!(summary.subject_organization.as_deref(), Some("  "));
        assert_eq!(summary.tier, ValidationTier::DomainValidation);
        assert_eq!(org_from_certificate(&summary), None);
    }

    #[test]
    fn garbage_is_rejected() {
        assert!(matches!(
            summarize_certificate(b"not a certificate", EvPolicyList::bundled()),
            Err(CertError::Der(_))
        ));
    }

    #[test]
    fn validity_window_is_exposed() {
        let der = make_cert(Some("Example Corp"), None);
        let summary = summarize_certificate(&der, EvPolicyList::bundled()).unwrap();
        assert!(summary.not_before < summary.not_after);
    }
}
