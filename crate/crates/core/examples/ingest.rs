//! Loads a raw CSV through a column schema: label mapping, a privileged-group
//! rule, one-hot categoricals and standardized numerics.

use fairsheaf::dataset::{read_csv, PrivilegedRule, Schema};

const RAW: &str = "\
age,housing,amount,credit
22,own,1200,good
35,rent,5400,bad
47,own,800,good
29,free,3000,good
61,rent,2500,bad
24,own,4100,bad
38,free,1900,good
52,own,700,good
";

fn main() -> fairsheaf::Result<()> {
    let schema = Schema {
        label: "credit".into(),
        positive_label: Some("good".into()),
        sensitive: "age".into(),
        privileged: PrivilegedRule::GreaterThan(25.0),
        categorical: vec!["housing".into()],
        drop: Vec::new(),
        standardize: true,
        sensitive_as_feature: true,
    };
    let (ds, warnings) = read_csv(RAW.as_bytes(), &schema)?;
    println!("features {:?}", ds.feature_names());
    println!("labels    {:?}", ds.labels());
    println!("sensitive {:?}", ds.sensitive());
    for w in warnings {
        println!("warning: {w}");
    }
    let first: Vec<String> = ds.features().row(0).iter().map(|v| format!("{v:.3}")).collect();
    println!("first row {first:?}");
    Ok(())
}
