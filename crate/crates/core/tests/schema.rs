mod common;

use personnel_core::schema::{
    self, apply_scripts, generate_ddl, migrate, verify_schema, MigrationScript, SchemaError,
    Target,
};
use personnel_core::StorageStrategy;

#[test]
fn large_object_schema_is_complete() {
    let Some((_db, mut client)) = common::migrated(StorageStrategy::LargeObject) else {
        return;
    };
    let report = verify_schema(&mut client, StorageStrategy::LargeObject).unwrap();
    assert!(report.is_complete(), "{:?}", report.missing_objects);
    assert_eq!(report.applied_versions, vec![1, 2, 3, 4]);
    assert_eq!(report.strategy, Some(StorageStrategy::LargeObject));
    assert_eq!(report.photo_columns.len(), 2);
    for pc in &report.photo_columns {
        assert_eq!((pc.declared_type.as_str(), pc.resolved_type.as_str()), ("lo", "oid"));
    }
}

#[test]
fn inline_schema_uses_bytea_and_no_domain() {
    let Some((_db, mut client)) = common::migrated(StorageStrategy::InlineBytes) else {
        return;
    };
    let report = verify_schema(&mut client, StorageStrategy::InlineBytes).unwrap();
    assert!(report.is_complete(), "{:?}", report.missing_objects);
    assert!(report.photo_columns.iter().all(|pc| pc.resolved_type == "bytea"));
    let domains: i64 = client
        .query_one("SELECT count(*) FROM pg_type WHERE typname = 'lo'", &[])
        .unwrap()
        .get(0);
    assert_eq!(domains, 0);
}

#[test]
fn migrate_is_idempotent() {
    let Some((_db, mut client)) = common::migrated(StorageStrategy::LargeObject) else {
        return;
    };
    let scripts = generate_ddl(StorageStrategy::LargeObject);
    let again = apply_scripts(&mut client, &scripts, StorageStrategy::LargeObject, Target::Latest).unwrap();
    assert!(again.is_empty());
}

#[test]
fn stepwise_targets_then_regression_refused() {
    let Some(db) = common::db() else { return };
    let mut client = db.client();
    let partial = migrate(&mut client, StorageStrategy::LargeObject, Target::Version(2)).unwrap();
    assert_eq!(partial.applied_versions, vec![1, 2]);
    assert!(!partial.is_complete());
    assert!(partial.missing_objects.iter().any(|m| m == "tab_t_emp_details.myphoto"));

    let full = migrate(&mut client, StorageStrategy::LargeObject, Target::Latest).unwrap();
    assert_eq!(full.current_version(), 4);

    let err = migrate(&mut client, StorageStrategy::LargeObject, Target::Version(3)).unwrap_err();
    assert!(matches!(err, SchemaError::VersionRegression { current: 4, target: 3 }));
    let err = migrate(&mut client, StorageStrategy::LargeObject, Target::Version(9)).unwrap_err();
    assert!(matches!(err, SchemaError::UnknownVersion { target: 9, latest: 4 }));
}

#[test]
fn strategy_switch_refused() {
    let Some((_db, mut client)) = common::migrated(StorageStrategy::LargeObject) else {
        return;
    };
    let err = migrate(&mut client, StorageStrategy::InlineBytes, Target::Latest).unwrap_err();
    assert!(matches!(err, SchemaError::StrategyMismatch { .. }));
    assert_eq!(
        schema::deployed_strategy(&mut client).unwrap(),
        Some(StorageStrategy::LargeObject)
    );
}

#[test]
fn failing_script_rolls_back_entirely() {
    let Some(db) = common::db() else { return };
    let mut client = db.client();
    let scripts = vec![
        MigrationScript {
            version: 1,
            description: "first".into(),
            statements: vec!["CREATE TABLE t_one (a int)".into()],
        },
        MigrationScript {
            version: 2,
            description: "broken".into(),
            statements: vec![
                "CREATE TABLE t_two (a int)".into(),
                "ALTER TABLE t_missing ADD COLUMN b int".into(),
            ],
        },
    ];
    let err = apply_scripts(&mut client, &scripts, StorageStrategy::InlineBytes, Target::Latest).unwrap_err();
    assert!(matches!(err, SchemaError::ScriptFailed { version: 2, .. }));
    let row = client
        .query_one(
            "SELECT to_regclass('t_one') IS NOT NULL, to_regclass('t_two') IS NOT NULL,
                    (SELECT array_agg(version ORDER BY version) FROM personnel_schema_history)",
            &[],
        )
        .unwrap();
    assert!(row.get::<_, bool>(0));
    assert!(!row.get::<_, bool>(1));
    assert_eq!(row.get::<_, Vec<i32>>(2), vec![1]);
}

#[test]
fn dropped_column_and_trigger_are_reported() {
    let Some((_db, mut client)) = common::migrated(StorageStrategy::LargeObject) else {
        return;
    };
    let trigger = schema::trigger_name(personnel_core::Table::Employees);
    client
        .batch_execute(&format!(
            "ALTER TABLE tab_t_students DROP COLUMN remark;
             DROP TRIGGER {trigger} ON tab_t_emp_details;"
        ))
        .unwrap();
    let report = verify_schema(&mut client, StorageStrategy::LargeObject).unwrap();
    assert!(report.missing_objects.contains(&"tab_t_students.remark".to_owned()));
    assert!(report.missing_objects.contains(&format!("trigger {trigger}")));
}

#[test]
fn edited_history_is_detected() {
    let Some((_db, mut client)) = common::migrated(StorageStrategy::LargeObject) else {
        return;
    };
    client
        .execute(
            "UPDATE personnel_schema_history SET checksum = 'x' WHERE version = 2",
            &[],
        )
        .unwrap();
    let err = migrate(&mut client, StorageStrategy::LargeObject, Target::Latest).unwrap_err();
    assert!(matches!(err, SchemaError::ChecksumDrift { version: 2 }));
}

#[test]
fn concurrent_migrations_serialize() {
    let Some(db) = common::db() else { return };
    let handles: Vec<_> = (0..4)
        .map(|_| {
            let mut client = db.client();
            std::thread::spawn(move || {
                migrate(&mut client, StorageStrategy::LargeObject, Target::Latest).unwrap()
            })
        })
        .collect();
    for h in handles {
        assert!(h.join().unwrap().is_complete());
    }
    let n: i64 = db
        .client()
        .query_one("SELECT count(*) FROM personnel_schema_history", &[])
        .unwrap()
        .get(0);
    assert_eq!(n, 4);
}

#[test]
fn non_utf8_database_is_reported() {
    let Some(db) = common::db() else { return };
    let name = format!("{}_ascii", db.name);
    let mut admin = db.params.connect("postgres").unwrap();
    admin
        .batch_execute(&format!("CREATE DATABASE {name} ENCODING 'SQL_ASCII' TEMPLATE template0"))
        .unwrap();
    let mut client = db.params.connect(&name).unwrap();
    let result = migrate(&mut client, StorageStrategy::LargeObject, Target::Latest).unwrap();
    drop(client);
    admin
        .batch_execute(&format!("DROP DATABASE {name} WITH (FORCE)"))
        .unwrap();
    assert_eq!(
        result.missing_objects,
        vec!["UTF8 database encoding (found SQL_ASCII)".to_owned()]
    );
}
