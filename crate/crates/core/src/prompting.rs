//! Chat-message assembly for every prompting method and role.
//!
//! A session is truncated to the condition's granularity and rendered into
//! a chat history. Under the client and counselor roles the model plays one
//! side of the dialogue: the other party's turns become `user` messages and
//! the persona's own turns become `assistant` messages. Under the observer
//! role (and with no role) the whole transcript goes into one `user` message
//! as labeled lines. The final user turn carries either one questionnaire
//! item or the request for five direct trait ratings.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{truncate, Session, Speaker};
use crate::inventory::InventoryItem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MessageRole {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: MessageRole,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: MessageRole, content: impl Into<String>) -> Self {
        ChatMessage { role, content: content.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    BaselineDirect,
    RoleplayOnly,
    QuestionnaireOnly,
    RoleplayAndQuestionnaire,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::BaselineDirect,
        Method::RoleplayOnly,
        Method::QuestionnaireOnly,
        Method::RoleplayAndQuestionnaire,
    ];

    /// Whether the method asks questionnaire items (as opposed to direct ratings).
    pub fn uses_questionnaire(self) -> bool {
        matches!(self, Method::QuestionnaireOnly | Method::RoleplayAndQuestionnaire)
    }

    /// Whether the method assigns a role-play persona.
    pub fn uses_roleplay(self) -> bool {
        matches!(self, Method::RoleplayOnly | Method::RoleplayAndQuestionnaire)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Method::BaselineDirect => "baseline_direct",
            Method::RoleplayOnly => "roleplay_only",
            Method::QuestionnaireOnly => "questionnaire_only",
            Method::RoleplayAndQuestionnaire => "roleplay_and_questionnaire",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Method::BaselineDirect => "Baseline",
            Method::RoleplayOnly => "+ Role-Play Only",
            Method::QuestionnaireOnly => "+ Questionnaire Only",
            Method::RoleplayAndQuestionnaire => "+ Role-Play and Questionnaire",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.as_str() == s)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Client,
    Counselor,
    Observer,
    NoRole,
}

impl Role {
    pub const ALL: [Role; 4] = [Role::Client, Role::Counselor, Role::Observer, Role::NoRole];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Client => "client",
            Role::Counselor => "counselor",
            Role::Observer => "observer",
            Role::NoRole => "no_role",
        }
    }

    pub fn parse(s: &str) -> Option<Role> {
        Role::ALL.into_iter().find(|r| r.as_str() == s)
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One experimental cell: method × role × granularity (the model is chosen
/// by the backend).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptCondition {
    pub method: Method,
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role_name: Option<String>,
    pub granularity: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PromptError {
    #[error("role {role} is not valid for method {method}")]
    RoleMismatch { method: Method, role: Role },
    #[error("a named persona is only available for the counselor and observer roles, not {0}")]
    NamedRoleMismatch(Role),
    #[error("no dialogue left after truncation")]
    EmptyContext,
    #[error("granularity {0} is outside (0, 1]")]
    InvalidGranularity(f64),
    #[error("missing template `{0}`")]
    MissingTemplate(String),
}

impl PromptCondition {
    pub fn new(method: Method, role: Role, granularity: f64) -> Self {
        PromptCondition { method, role, role_name: None, granularity }
    }

    /// Checks the method/role pairing: methods without role-play take
    /// `no_role`, role-play methods need a concrete role.
    pub fn validate(&self) -> Result<(), PromptError> {
        let ok = if self.method.uses_roleplay() {
            self.role != Role::NoRole
        } else {
            self.role == Role::NoRole
        };
        if !ok {
            return Err(PromptError::RoleMismatch { method: self.method, role: self.role });
        }
        if self.role_name.is_some() && !matches!(self.role, Role::Counselor | Role::Observer) {
            return Err(PromptError::NamedRoleMismatch(self.role));
        }
        if !(self.granularity > 0.0 && self.granularity <= 1.0) {
            return Err(PromptError::InvalidGranularity(self.granularity));
        }
        Ok(())
    }

    /// Short stable identifier, e.g. `roleplay_and_questionnaire.counselor-B.F. Skinner.g0.30`.
    pub fn label(&self) -> String {
        let mut s = alloc::format!("{}.{}", self.method, self.role);
        if let Some(name) = &self.role_name {
            s.push('-');
            s.push_str(name);
        }
        s.push_str(&alloc::format!(".g{:.2}", self.granularity));
        s
    }
}

/// Attaches a persona name for the named-role ablation.
pub fn with_named_role(condition: &PromptCondition, name: &str) -> Result<PromptCondition, PromptError> {
    if !matches!(condition.role, Role::Counselor | Role::Observer) {
        return Err(PromptError::NamedRoleMismatch(condition.role));
    }
    let mut out = condition.clone();
    out.role_name = Some(name.to_string());
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub messages: Vec<ChatMessage>,
    pub condition: PromptCondition,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub item_index: Option<u8>,
    pub session_id: String,
}

/// Template file names, in the order they are documented.
pub const TEMPLATE_FILES: [&str; 9] = [
    "client.system",
    "counselor.system",
    "observer.system",
    "neutral.system",
    "questionnaire.preamble",
    "observer.preamble",
    "questionnaire.options",
    "direct.request",
    "strings",
];

const STRING_KEYS: [&str; 8] = [
    "situation.client",
    "situation.counselor",
    "dialogue.header",
    "label.client",
    "label.counselor",
    "previously_said",
    "named_role",
    "item_prefix",
];

/// Prompt wording for one language. Placeholders use `{name}` syntax.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Templates {
    files: BTreeMap<String, String>,
    strings: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    #[default]
    En,
    Zh,
}

macro_rules! bundled {
    ($lang:literal) => {
        [
            ("client.system", include_str!(concat!("../templates/", $lang, "/client.system"))),
            ("counselor.system", include_str!(concat!("../templates/", $lang, "/counselor.system"))),
            ("observer.system", include_str!(concat!("../templates/", $lang, "/observer.system"))),
            ("neutral.system", include_str!(concat!("../templates/", $lang, "/neutral.system"))),
            ("questionnaire.preamble", include_str!(concat!("../templates/", $lang, "/questionnaire.preamble"))),
            ("observer.preamble", include_str!(concat!("../templates/", $lang, "/observer.preamble"))),
            ("questionnaire.options", include_str!(concat!("../templates/", $lang, "/questionnaire.options"))),
            ("direct.request", include_str!(concat!("../templates/", $lang, "/direct.request"))),
            ("strings", include_str!(concat!("../templates/", $lang, "/strings"))),
        ]
    };
}

impl Templates {
    /// Raw bundled template files for `language`, as (file name, content).
    pub fn bundled_files(language: Language) -> [(&'static str, &'static str); TEMPLATE_FILES.len()] {
        match language {
            Language::En => bundled!("en"),
            Language::Zh => bundled!("zh"),
        }
    }

    pub fn bundled(language: Language) -> Self {
        let files = Self::bundled_files(language);
        Self::from_files(|name| files.iter().find(|(n, _)| *n == name).map(|(_, c)| c.to_string()))
            .expect("bundled templates are complete")
    }

    pub fn english() -> Self {
        Self::bundled(Language::En)
    }

    /// Builds templates from a lookup of file name → content. Trailing
    /// newlines are stripped; the `strings` file holds `key = value` lines.
    pub fn from_files<F: Fn(&str) -> Option<String>>(lookup: F) -> Result<Self, PromptError> {
        let mut files = BTreeMap::new();
        for name in TEMPLATE_FILES {
            let content = lookup(name).ok_or_else(|| PromptError::MissingTemplate(name.to_string()))?;
            files.insert(name.to_string(), content.trim_end_matches(['\n', '\r']).to_string());
        }
        let mut strings = BTreeMap::new();
        for line in files["strings"].lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some((k, v)) = line.split_once('=') {
                strings.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        for key in STRING_KEYS {
            if !strings.contains_key(key) {
                return Err(PromptError::MissingTemplate(alloc::format!("strings:{key}")));
            }
        }
        Ok(Templates { files, strings })
    }

    fn file(&self, name: &str) -> &str {
        &self.files[name]
    }

    fn string(&self, key: &str) -> &str {
        &self.strings[key]
    }

    /// Renders an item as a completion of the "I am someone who" stem.
    pub fn item_text(&self, item: &InventoryItem) -> String {
        let prefix = self.string("item_prefix");
        if prefix.is_ascii() {
            let mut chars = item.text.chars();
            let mut out = String::from(prefix);
            out.push(' ');
            if let Some(first) = chars.next() {
                out.extend(first.to_lowercase());
            }
            out.push_str(chars.as_str());
            out.push('.');
            out
        } else {
            alloc::format!("{prefix}{}", item.text)
        }
    }

    fn system_prompt(&self, condition: &PromptCondition) -> String {
        let mut system = if condition.method.uses_roleplay() {
            match condition.role {
                Role::Client => self.file("client.system").to_string(),
                Role::Counselor => self.file("counselor.system").to_string(),
                Role::Observer => self.file("observer.system").to_string(),
                Role::NoRole => self.file("neutral.system").to_string(),
            }
        } else {
            self.file("neutral.system").to_string()
        };
        if let Some(name) = &condition.role_name {
            system.push(' ');
            system.push_str(&self.string("named_role").replace("{name}", name));
        }
        system
    }

    fn question_block(&self, item: &InventoryItem) -> String {
        self.file("questionnaire.options").replace("{item}", &self.item_text(item))
    }

    fn final_item_request(&self, role: Role, item: &InventoryItem) -> String {
        let situation = match role {
            Role::Client => self.string("situation.client"),
            _ => self.string("situation.counselor"),
        };
        let preamble = self.file("questionnaire.preamble").replace("{situation}", situation);
        alloc::format!("{preamble}\n{}", self.question_block(item))
    }

    fn observer_transcript(&self, session: &Session) -> String {
        let mut out = String::from(self.string("dialogue.header"));
        for u in &session.utterances {
            let label = match u.speaker {
                Speaker::Client => self.string("label.client"),
                Speaker::Counselor => self.string("label.counselor"),
            };
            out.push('\n');
            out.push_str(label);
            out.push_str(": ");
            out.push_str(&u.text);
        }
        out
    }

    /// Role-play chat history: persona turns are `assistant`, the other party's
    /// turns are `user`; consecutive same-role turns are merged with `\n` and a
    /// leading persona turn is folded into the system message.
    fn roleplay_history(&self, session: &Session, persona: Speaker, system: &mut String) -> Vec<ChatMessage> {
        let mut history: Vec<ChatMessage> = Vec::new();
        for u in &session.utterances {
            let role = if u.speaker == persona { MessageRole::Assistant } else { MessageRole::User };
            match history.last_mut() {
                Some(last) if last.role == role => {
                    last.content.push('\n');
                    last.content.push_str(&u.text);
                }
                _ => history.push(ChatMessage::new(role, u.text.clone())),
            }
        }
        if history.first().is_some_and(|m| m.role == MessageRole::Assistant) {
            let lead = history.remove(0);
            system.push('\n');
            system.push_str(&self.string("previously_said").replace("{text}", &lead.content));
        }
        history
    }

    fn assemble(&self, session: &Session, condition: &PromptCondition, request_for: impl Fn(Role) -> String, observer_lead: &str) -> Vec<ChatMessage> {
        let mut system = self.system_prompt(condition);
        let persona = match condition.role {
            Role::Client => Some(Speaker::Client),
            Role::Counselor => Some(Speaker::Counselor),
            Role::Observer | Role::NoRole => None,
        };
        let mut messages = Vec::new();
        match persona {
            Some(persona) => {
                let mut history = self.roleplay_history(session, persona, &mut system);
                let request = request_for(condition.role);
                match history.last_mut() {
                    Some(last) if last.role == MessageRole::User => {
                        last.content.push('\n');
                        last.content.push_str(&request);
                    }
                    _ => history.push(ChatMessage::new(MessageRole::User, request)),
                }
                messages.push(ChatMessage::new(MessageRole::System, system));
                messages.extend(history);
            }
            None => {
                let mut body = self.observer_transcript(session);
                body.push_str("\n---\n");
                if !observer_lead.is_empty() {
                    body.push_str(observer_lead);
                    body.push('\n');
                }
                body.push_str(&request_for(condition.role));
                messages.push(ChatMessage::new(MessageRole::System, system));
                messages.push(ChatMessage::new(MessageRole::User, body));
            }
        }
        messages
    }

    /// One questionnaire-item prompt for `session` under `condition`.
    pub fn build_item_prompt(
        &self,
        session: &Session,
        condition: &PromptCondition,
        item: &InventoryItem,
    ) -> Result<PromptBundle, PromptError> {
        condition.validate()?;
        if !condition.method.uses_questionnaire() {
            return Err(PromptError::RoleMismatch { method: condition.method, role: condition.role });
        }
        let session = self.context(session, condition)?;
        let messages = self.assemble(
            &session,
            condition,
            |role| match role {
                Role::Client | Role::Counselor => self.final_item_request(role, item),
                Role::Observer | Role::NoRole => self.question_block(item),
            },
            self.file("observer.preamble"),
        );
        Ok(PromptBundle {
            messages,
            condition: condition.clone(),
            item_index: Some(item.index),
            session_id: session.session_id.clone(),
        })
    }

    /// The direct five-score prompt used by the baseline and role-play-only methods.
    pub fn build_direct_prompt(&self, session: &Session, condition: &PromptCondition) -> Result<PromptBundle, PromptError> {
        condition.validate()?;
        if condition.method.uses_questionnaire() {
            return Err(PromptError::RoleMismatch { method: condition.method, role: condition.role });
        }
        let session = self.context(session, condition)?;
        let request = self.file("direct.request").to_string();
        let messages = self.assemble(&session, condition, |_| request.clone(), "");
        Ok(PromptBundle {
            messages,
            condition: condition.clone(),
            item_index: None,
            session_id: session.session_id.clone(),
        })
    }

    fn context(&self, session: &Session, condition: &PromptCondition) -> Result<Session, PromptError> {
        if session.utterances.is_empty() {
            return Err(PromptError::EmptyContext);
        }
        truncate(session, condition.granularity).map_err(|_| PromptError::InvalidGranularity(condition.granularity))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Utterance;
    use crate::inventory::Inventory;
    use alloc::vec;

    fn session(utts: Vec<Utterance>) -> Session {
        Session {
            session_id: "s1".into(),
            client_id: "c1".into(),
            counselor_id: "t1".into(),
            utterances: utts,
            ground_truth: None,
            item_ground_truth: None,
        }
    }

    fn hi_hello() -> Session {
        session(vec![Utterance::counselor("hi"), Utterance::client("hello")])
    }

    fn item(i: u8) -> InventoryItem {
        Inventory::bfi2().unwrap().item(i).unwrap().clone()
    }

    fn rq(role: Role) -> PromptCondition {
        PromptCondition::new(Method::RoleplayAndQuestionnaire, role, 1.0)
    }

    #[test]
    fn client_role_structure() {
        let t = Templates::english();
        let b = t.build_item_prompt(&hi_hello(), &rq(Role::Client), &item(1)).unwrap();
        let roles: Vec<_> = b.messages.iter().map(|m| m.role).collect();
        assert_eq!(roles, vec![MessageRole::System, MessageRole::User, MessageRole::Assistant, MessageRole::User]);
        assert!(b.messages[0].content.starts_with("Act like a real human and do not mention anything with AI."));
        assert_eq!(b.messages[1].content, "hi");
        assert_eq!(b.messages[2].content, "hello");
        let last = &b.messages[3].content;
        assert!(last.starts_with("Before we end today's counseling session"));
        assert!(last.contains("your own situation"));
        assert!(last.contains("Question: I am someone who is outgoing, sociable."));
        assert!(last.contains("1. Disagree (strongly)\n2. Disagree (a little)\n3. Neutral (no opinion)\n4. Agree (a little)\n5. Agree (strongly)"));
        assert!(last.ends_with("Please tell me your choice and explain the reason:"));
        assert_eq!(b.item_index, Some(1));
    }

    #[test]
    fn counselor_role_inverts_speakers() {
        let t = Templates::english();
        let s = session(vec![Utterance::client("I feel low"), Utterance::counselor("Tell me more"), Utterance::client("ok")]);
        let b = t.build_item_prompt(&s, &rq(Role::Counselor), &item(2)).unwrap();
        let roles: Vec<_> = b.messages.iter().map(|m| m.role).collect();
        assert_eq!(roles, vec![MessageRole::System, MessageRole::User, MessageRole::Assistant, MessageRole::User]);
        assert!(b.messages[0].content.starts_with("Act like a real counselor"));
        assert_eq!(b.messages[1].content, "I feel low");
        assert!(b.messages[3].content.starts_with("ok\nBefore we end"));
        assert!(b.messages[3].content.contains("client's situation"));
    }

    #[test]
    fn observer_renders_labeled_transcript() {
        let t = Templates::english();
        let b = t.build_item_prompt(&hi_hello(), &rq(Role::Observer), &item(1)).unwrap();
        assert_eq!(b.messages.len(), 2);
        assert!(b.messages[0].content.starts_with("You are an AI proficient in dialogue analysis"));
        let body = &b.messages[1].content;
        assert!(body.starts_with("Here come the dialogue:\nCounselor: hi\nUser: hello\n---\n"));
        assert!(body.contains("Based on the dialogue, please provide the most appropriate option"));
        assert!(body.ends_with("Please tell me your choice and explain the reason:"));
    }

    #[test]
    fn questionnaire_only_has_no_persona() {
        let t = Templates::english();
        let c = PromptCondition::new(Method::QuestionnaireOnly, Role::NoRole, 1.0);
        let b = t.build_item_prompt(&hi_hello(), &c, &item(1)).unwrap();
        assert_eq!(b.messages.len(), 2);
        assert_eq!(b.messages[0].content, t.file("neutral.system"));
        assert!(!b.messages[0].content.contains("Act like"));
    }

    #[test]
    fn granularity_truncates_context() {
        let t = Templates::english();
        let s = session(vec![
            Utterance::counselor("a1"),
            Utterance::client("b1"),
            Utterance::counselor("a2"),
            Utterance::client("b2"),
        ]);
        let mut c = rq(Role::Client);
        c.granularity = 0.5;
        let b = t.build_item_prompt(&s, &c, &item(3)).unwrap();
        let all: String = b.messages.iter().map(|m| m.content.as_str()).collect();
        assert!(all.contains("a1") && all.contains("b1"));
        assert!(!all.contains("a2") && !all.contains("b2"));
    }

    #[test]
    fn leading_client_turn_folds_into_system() {
        let t = Templates::english();
        let s = session(vec![Utterance::client("I came early"), Utterance::counselor("welcome"), Utterance::client("thanks")]);
        let b = t.build_item_prompt(&s, &rq(Role::Client), &item(1)).unwrap();
        assert!(b.messages[0].content.ends_with("\nYou previously said: I came early"));
        assert_eq!(b.messages[1].role, MessageRole::User);
        assert_eq!(b.messages[1].content, "welcome");
    }

    #[test]
    fn consecutive_turns_merge() {
        let t = Templates::english();
        let s = session(vec![Utterance::counselor("one"), Utterance::counselor("two"), Utterance::client("three")]);
        let b = t.build_item_prompt(&s, &rq(Role::Client), &item(1)).unwrap();
        assert_eq!(b.messages[1].content, "one\ntwo");
        for w in b.messages[1..].windows(2) {
            assert_ne!(w[0].role, w[1].role);
        }
    }

    #[test]
    fn item_prompt_rejects_direct_methods() {
        let t = Templates::english();
        let c = PromptCondition::new(Method::BaselineDirect, Role::NoRole, 1.0);
        assert!(matches!(t.build_item_prompt(&hi_hello(), &c, &item(1)), Err(PromptError::RoleMismatch { .. })));
        let c = PromptCondition::new(Method::RoleplayAndQuestionnaire, Role::NoRole, 1.0);
        assert!(matches!(t.build_item_prompt(&hi_hello(), &c, &item(1)), Err(PromptError::RoleMismatch { .. })));
        let c = PromptCondition::new(Method::QuestionnaireOnly, Role::Client, 1.0);
        assert!(matches!(t.build_item_prompt(&hi_hello(), &c, &item(1)), Err(PromptError::RoleMismatch { .. })));
    }

    #[test]
    fn direct_prompts() {
        let t = Templates::english();
        let base = PromptCondition::new(Method::BaselineDirect, Role::NoRole, 1.0);
        let b = t.build_direct_prompt(&hi_hello(), &base).unwrap();
        assert!(!b.messages[0].content.contains("Act like"));
        assert!(b.messages.last().unwrap().content.contains("O=<x> C=<x> E=<x> A=<x> N=<x>"));
        assert_eq!(b.item_index, None);

        let rp = PromptCondition::new(Method::RoleplayOnly, Role::Client, 1.0);
        let b = t.build_direct_prompt(&hi_hello(), &rp).unwrap();
        assert!(b.messages[0].content.starts_with("Act like a real human"));
        assert!(b.messages.last().unwrap().content.ends_with("O=<x> C=<x> E=<x> A=<x> N=<x>"));

        let empty = session(vec![]);
        assert_eq!(t.build_direct_prompt(&empty, &base), Err(PromptError::EmptyContext));
        assert!(t.build_direct_prompt(&hi_hello(), &rq(Role::Client)).is_err());
    }

    #[test]
    fn named_roles() {
        let t = Templates::english();
        let c = with_named_role(&rq(Role::Counselor), "B.F. Skinner").unwrap();
        let b = t.build_item_prompt(&hi_hello(), &c, &item(1)).unwrap();
        assert!(b.messages[0].content.contains("You are B.F. Skinner."));
        let c = with_named_role(&rq(Role::Observer), "Zhang3").unwrap();
        let b = t.build_item_prompt(&hi_hello(), &c, &item(1)).unwrap();
        assert!(b.messages[0].content.contains("You are Zhang3."));
        assert_eq!(with_named_role(&rq(Role::Client), "X"), Err(PromptError::NamedRoleMismatch(Role::Client)));
        let none = PromptCondition::new(Method::QuestionnaireOnly, Role::NoRole, 1.0);
        assert!(with_named_role(&none, "X").is_err());
    }

    #[test]
    fn chinese_templates_load() {
        let t = Templates::bundled(Language::Zh);
        let b = t.build_item_prompt(&hi_hello(), &rq(Role::Observer), &item(1)).unwrap();
        assert!(b.messages[1].content.contains("咨询师: hi"));
        assert!(b.messages[1].content.contains("1. 非常不同意"));
    }

    #[test]
    fn missing_template_reported() {
        let err = Templates::from_files(|n| if n == "direct.request" { None } else { Some("x".into()) }).unwrap_err();
        assert_eq!(err, PromptError::MissingTemplate("direct.request".into()));
    }
}
