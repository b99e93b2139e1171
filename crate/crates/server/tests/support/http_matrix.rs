//! Scope × viewer visibility over HTTP, cross-checked against the hub
//! module and a hand-written table.

use hub_core::{Scope, UserId, Viewer};
use serde_json::{json, Value};

use super::server::TestServer;

#[derive(Debug, Clone, Copy)]
enum Rel {
    Anonymous,
    NonMember,
    Member,
}

/// (project listed, report listed) per cell. Member is the owner and creator.
fn table(scope: Scope, rel: Rel) -> (bool, bool) {
    match (scope, rel) {
        (Scope::Private, Rel::Anonymous) => (false, false),
        (Scope::Private, Rel::NonMember) => (false, false),
        (Scope::Private, Rel::Member) => (true, true),
        (Scope::Internal, Rel::Anonymous) => (false, false),
        (Scope::Internal, Rel::NonMember) => (true, true),
        (Scope::Internal, Rel::Member) => (true, true),
        (Scope::Public, Rel::Anonymous) => (true, true),
        (Scope::Public, Rel::NonMember) => (true, true),
        (Scope::Public, Rel::Member) => (true, true),
    }
}

fn ids(list: &Value, key: &str) -> Vec<String> {
    list.as_array().unwrap().iter().map(|v| v[key].as_str().unwrap().to_owned()).collect()
}

/// Returns the number of checked cells; panics on the first disagreement.
pub async fn check(s: &TestServer) -> usize {
    let owner = s.login("alice").await;
    let outsider = s.login("bob").await;
    let mut cells = 0;
    for scope in Scope::ALL {
        let p = s.create_project(&owner, &format!("m-{scope}"), &scope.to_string()).await;
        let r = s.publish(&owner, &p, &format!("r-{scope}"), &scope.to_string(), &[("index.html", b"x")]).await;
        let r = r["report_id"].as_str().unwrap().to_owned();
        for rel in [Rel::Anonymous, Rel::NonMember, Rel::Member] {
            let (token, viewer) = match rel {
                Rel::Anonymous => (None, Viewer::Anonymous),
                Rel::NonMember => (Some(outsider.as_str()), Viewer::User(user_id(s, "bob"))),
                Rel::Member => (Some(owner.as_str()), Viewer::User(user_id(s, "alice"))),
            };
            let (want_p, want_r) = table(scope, rel);

            let (_, projects) = s.get("/projects", token).await;
            let http_p = ids(&projects, "project_id").contains(&p);
            let module_p = s.app.hub.list_projects(&viewer).iter().any(|x| x.project.project_id.as_str() == p);
            let (status, _) = s.get(&format!("/projects/{p}"), token).await;
            assert_eq!((http_p, module_p, status.is_success()), (want_p, want_p, want_p), "project {scope} {rel:?}");

            let (_, reports) = s.get("/reports", token).await;
            let http_r = ids(&reports, "report_id").contains(&r);
            let module_r = s.app.hub.list_reports(&viewer).iter().any(|x| x.report_id.as_str() == r);
            let (status, _) = s.get(&format!("/reports/{r}"), token).await;
            assert_eq!((http_r, module_r, status.is_success()), (want_r, want_r, want_r), "report {scope} {rel:?}");
            let (status, _) = s.fetch(&format!("/reports/{r}/latest/"), token).await;
            assert_eq!(status.is_success(), want_r, "content {scope} {rel:?}");
            cells += 2;
        }
    }
    // a password gates non-creators but not the creator
    let p = s.create_project(&owner, "m-pw", "public").await;
    let r = s.publish(&owner, &p, "r-pw", "public", &[("index.html", b"x")]).await;
    let r = r["report_id"].as_str().unwrap();
    let (status, _) = s.post(&format!("/reports/{r}/password"), Some(&owner), json!({ "password": "s3cret" })).await;
    assert!(status.is_success());
    assert_eq!(s.get(&format!("/reports/{r}"), None).await.0, 403);
    assert_eq!(s.get(&format!("/reports/{r}?password=nope"), Some(&outsider)).await.0, 403);
    assert_eq!(s.get(&format!("/reports/{r}?password=s3cret"), None).await.0, 200);
    assert_eq!(s.get(&format!("/reports/{r}"), Some(&owner)).await.0, 200);
    cells
}

fn user_id(s: &TestServer, name: &str) -> UserId {
    s.app.hub.user_by_name(name).unwrap().user_id
}
