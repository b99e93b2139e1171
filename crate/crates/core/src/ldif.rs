//! RFC 2849 LDIF export of the local user registry.

use base64::Engine as _;

use crate::model::User;

pub const DEFAULT_BASE_DN: &str = "ou=people,dc=hub,dc=local";

const MAX_LINE: usize = 76;

/// SAFE-STRING per RFC 2849: no NUL/LF/CR, ASCII only, and no leading
/// space, colon or less-than. Trailing spaces are also base64-encoded since
/// many parsers trim them.
fn is_safe_string(value: &str) -> bool {
    let bytes = value.as_bytes();
    if let Some(first) = bytes.first() {
        if matches!(first, b' ' | b':' | b'<') {
            return false;
        }
    }
    if bytes.last() == Some(&b' ') {
        return false;
    }
    bytes.iter().all(|b| b.is_ascii() && !matches!(b, 0 | b'\n' | b'\r'))
}

fn push_folded(out: &mut String, line: &str) {
    // fold on char boundaries; continuation lines start with a single space
    let mut current = 0usize;
    let mut first = true;
    for ch in line.chars() {
        let limit = if first { MAX_LINE } else { MAX_LINE - 1 };
        if current + ch.len_utf8() > limit {
            out.push_str("\n ");
            current = 0;
            first = false;
        }
        out.push(ch);
        current += ch.len_utf8();
    }
    out.push('\n');
}

fn push_attr(out: &mut String, attr: &str, value: &str) {
    let line = if is_safe_string(value) {
        format!("{attr}: {value}")
    } else {
        format!("{attr}:: {}", base64::engine::general_purpose::STANDARD.encode(value))
    };
    push_folded(out, &line);
}

/// Renders one entry per user, ascending by numeric id. An empty registry
/// yields an empty document.
pub fn export<'a>(users: impl IntoIterator<Item = &'a User>, base_dn: &str) -> String {
    let mut users: Vec<&User> = users.into_iter().collect();
    users.sort_by_key(|u| u.numeric_id);
    if users.is_empty() {
        return String::new();
    }
    let mut out = String::from("version: 1\n");
    for user in users {
        out.push('\n');
        let uid_number = user.numeric_id.to_string();
        push_attr(&mut out, "dn", &format!("uid={},{base_dn}", user.username));
        push_attr(&mut out, "objectClass", "inetOrgPerson");
        push_attr(&mut out, "objectClass", "posixAccount");
        push_attr(&mut out, "cn", &user.username);
        push_attr(&mut out, "sn", &user.username);
        push_attr(&mut out, "uid", &user.username);
        push_attr(&mut out, "uidNumber", &uid_number);
        push_attr(&mut out, "gidNumber", &uid_number);
        push_attr(&mut out, "homeDirectory", &format!("/home/{}", user.username));
        if !user.email.is_empty() {
            push_attr(&mut out, "mail", &user.email);
        }
    }
    out
}
