//! User profiles and the first-person persona prompt rendered from them.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

const PERSONA_TEMPLATE: &str = include_str!("../assets/persona_template.txt");

pub const DEFAULT_QUIET_THRESHOLD_MS: u64 = 3000;

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("goal is empty")]
    EmptyGoal,
    #[error("role traits are empty")]
    EmptyTraits,
    #[error("quiet_threshold_ms must be positive")]
    ZeroQuietThreshold,
    #[error("invalid profile document: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("profile store i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("no profile stored for {0}")]
    NotFound(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserProfile {
    pub user_id: String,
    pub goal: String,
    pub role_traits: String,
    pub voice_ref: String,
    pub quiet_threshold_ms: u64,
}

#[derive(Debug, Clone, Default)]
pub struct ProfileOverrides {
    pub user_id: Option<String>,
    pub quiet_threshold_ms: Option<u64>,
}

impl UserProfile {
    pub fn validate(&self) -> Result<(), ProfileError> {
        if self.goal.trim().is_empty() {
            return Err(ProfileError::EmptyGoal);
        }
        if self.role_traits.trim().is_empty() {
            return Err(ProfileError::EmptyTraits);
        }
        if self.quiet_threshold_ms == 0 {
            return Err(ProfileError::ZeroQuietThreshold);
        }
        Ok(())
    }

    /// Parses and validates a profile document; unknown keys are rejected.
    pub fn from_json(text: &str) -> Result<Self, ProfileError> {
        let profile: UserProfile = serde_json::from_str(text)?;
        profile.validate()?;
        Ok(profile)
    }

    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for field in [&self.user_id, &self.goal, &self.role_traits, &self.voice_ref] {
            h.update((field.len() as u64).to_le_bytes());
            h.update(field.as_bytes());
        }
        h.update(self.quiet_threshold_ms.to_le_bytes());
        hex(&h.finalize())
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn create_profile(
    goal: &str,
    role_traits: &str,
    voice_ref: &str,
    overrides: ProfileOverrides,
) -> Result<UserProfile, ProfileError> {
    let goal = goal.trim();
    let role_traits = role_traits.trim();
    if goal.is_empty() {
        return Err(ProfileError::EmptyGoal);
    }
    if role_traits.is_empty() {
        return Err(ProfileError::EmptyTraits);
    }
    let user_id = overrides.user_id.unwrap_or_else(|| {
        let mut h = Sha256::new();
        for part in [goal, role_traits, voice_ref] {
            h.update(part.as_bytes());
            h.update([0]);
        }
        format!("user-{}", &hex(&h.finalize())[..12])
    });
    let profile = UserProfile {
        user_id,
        goal: goal.to_string(),
        role_traits: role_traits.to_string(),
        voice_ref: voice_ref.to_string(),
        quiet_threshold_ms: overrides.quiet_threshold_ms.unwrap_or(DEFAULT_QUIET_THRESHOLD_MS),
    };
    profile.validate()?;
    Ok(profile)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PersonaPrompt {
    pub text: String,
    pub profile_hash: String,
}

pub fn persona_template() -> &'static str {
    PERSONA_TEMPLATE
}

/// Literal substitution of `{role}` and `{goal}`; no escaping.
pub fn render_persona_prompt(profile: &UserProfile) -> Result<PersonaPrompt, ProfileError> {
    profile.validate()?;
    // Substitute in one pass so a goal containing "{role}" is left alone.
    let mut text = String::with_capacity(PERSONA_TEMPLATE.len() + profile.goal.len() + profile.role_traits.len());
    let mut rest = PERSONA_TEMPLATE;
    while let Some(open) = rest.find('{') {
        text.push_str(&rest[..open]);
        let tail = &rest[open..];
        if let Some(after) = tail.strip_prefix("{role}") {
            text.push_str(&profile.role_traits);
            rest = after;
        } else if let Some(after) = tail.strip_prefix("{goal}") {
            text.push_str(&profile.goal);
            rest = after;
        } else {
            text.push('{');
            rest = &tail[1..];
        }
    }
    text.push_str(rest);
    Ok(PersonaPrompt {
        text,
        profile_hash: profile.digest(),
    })
}

/// One JSON document per user under a directory.
#[derive(Debug, Clone)]
pub struct ProfileStore {
    dir: PathBuf,
}

impl ProfileStore {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, ProfileError> {
        fs::create_dir_all(dir.as_ref())?;
        Ok(Self {
            dir: dir.as_ref().to_path_buf(),
        })
    }

    fn path_for(&self, user_id: &str) -> PathBuf {
        let safe: String = user_id
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
            .collect();
        self.dir.join(format!("{safe}.json"))
    }

    pub fn save(&self, profile: &UserProfile) -> Result<PathBuf, ProfileError> {
        profile.validate()?;
        let path = self.path_for(&profile.user_id);
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, serde_json::to_string_pretty(profile)? + "\n")?;
        fs::rename(&tmp, &path)?;
        Ok(path)
    }

    pub fn load(&self, user_id: &str) -> Result<UserProfile, ProfileError> {
        let path = self.path_for(user_id);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(ProfileError::NotFound(user_id.to_string()))
            }
            Err(e) => return Err(e.into()),
        };
        UserProfile::from_json(&text)
    }
}
