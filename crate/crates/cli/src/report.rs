//! Plain-text, CSV and JSON renderings of evaluation results.

use std::fmt::Write;

use clap::ValueEnum;
use sqlsess_core::evaluation::{AgreementReport, CorrelationMatrix, EvaluationReport, Profile, Summary, PROFILE_PERCENTILES};
use sqlsess_core::Label;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
    Json,
}

fn json(value: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(value).expect("report serializes") + "\n"
}

fn short(l: Label) -> &'static str {
    match l {
        Label::Segment => "S",
        Label::Continue => "C",
    }
}

pub fn evaluation(r: &EvaluationReport, format: Format) -> String {
    let c = r.confusion;
    match format {
        Format::Json => json(r),
        Format::Csv => format!(
            "accuracy,precision,recall,f_measure,nb_ss,nb_sc,nb_cs,nb_cc\n{},{},{},{},{},{},{},{}\n",
            r.accuracy, r.precision, r.recall, r.f_measure, c.ss, c.sc, c.cs, c.cc
        ),
        Format::Text => {
            let mut s = String::new();
            writeln!(s, "accuracy   {:.4}", r.accuracy).unwrap();
            writeln!(s, "precision  {:.4}", r.precision).unwrap();
            writeln!(s, "recall     {:.4}", r.recall).unwrap();
            writeln!(s, "F-measure  {:.4}", r.f_measure).unwrap();
            writeln!(s).unwrap();
            writeln!(s, "truth \\ pred  SEGMENT  CONTINUE").unwrap();
            writeln!(s, "SEGMENT       {:>7}  {:>8}", c.ss, c.sc).unwrap();
            writeln!(s, "CONTINUE      {:>7}  {:>8}", c.cs, c.cc).unwrap();
            s
        }
    }
}

pub fn agreement(r: &AgreementReport, format: Format) -> String {
    match format {
        Format::Json => json(r),
        Format::Csv => {
            let mut s = String::new();
            writeln!(s, "{},count,fraction", r.methods.join(",")).unwrap();
            for row in &r.joint {
                let labels: Vec<&str> = row.labels.iter().map(|l| l.as_str()).collect();
                writeln!(s, "{},{},{}", labels.join(","), row.count, row.fraction).unwrap();
            }
            s
        }
        Format::Text => {
            let mut s = String::new();
            let width = r.methods.iter().map(String::len).max().unwrap_or(0).max(6);
            writeln!(s, "Cohen's kappa").unwrap();
            write!(s, "{:width$}", "").unwrap();
            for m in &r.methods {
                write!(s, "  {m:>width$}").unwrap();
            }
            writeln!(s).unwrap();
            for (m, row) in r.methods.iter().zip(&r.cohen) {
                write!(s, "{m:width$}").unwrap();
                for k in row {
                    write!(s, "  {k:>width$.3}").unwrap();
                }
                writeln!(s).unwrap();
            }
            writeln!(s).unwrap();
            writeln!(s, "Fleiss' kappa   {:.4}", r.fleiss).unwrap();
            writeln!(s, "full agreement  {:.4}", r.full_agreement).unwrap();
            writeln!(s).unwrap();
            writeln!(s, "{}  count  fraction", r.methods.iter().map(|m| format!("{m:>width$}")).collect::<Vec<_>>().join("  ")).unwrap();
            for row in &r.joint {
                let cells: Vec<String> = row.labels.iter().map(|l| format!("{:>width$}", short(*l))).collect();
                writeln!(s, "{}  {:>5}  {:>8.4}", cells.join("  "), row.count, row.fraction).unwrap();
            }
            s
        }
    }
}

fn summary_rows(s: &mut String, rows: &[Summary], csv: bool) {
    for r in rows {
        if csv {
            let p: Vec<String> = r.percentiles.iter().map(|v| v.to_string()).collect();
            writeln!(s, "{},{},{},{},{},{}", r.name, r.avg, r.stddev, r.min, r.max, p.join(",")).unwrap();
        } else {
            write!(s, "{:<14}{:>10.2}{:>10.2}{:>10.2}{:>10.2}", r.name, r.avg, r.stddev, r.min, r.max).unwrap();
            for v in &r.percentiles {
                write!(s, "{v:>10.2}").unwrap();
            }
            writeln!(s).unwrap();
        }
    }
}

pub fn profile(p: &Profile, c: &CorrelationMatrix, format: Format) -> String {
    if format == Format::Json {
        #[derive(serde::Serialize)]
        struct Both<'a> {
            profile: &'a Profile,
            correlations: &'a CorrelationMatrix,
        }
        return json(&Both { profile: p, correlations: c });
    }
    let csv = format == Format::Csv;
    let pcts: Vec<String> = PROFILE_PERCENTILES.iter().map(|k| format!("p{k}")).collect();
    let mut s = String::new();
    if csv {
        writeln!(s, "name,avg,stddev,min,max,{}", pcts.join(",")).unwrap();
    } else {
        write!(s, "{:<14}{:>10}{:>10}{:>10}{:>10}", "", "avg", "stddev", "min", "max").unwrap();
        for h in &pcts {
            write!(s, "{h:>10}").unwrap();
        }
        writeln!(s).unwrap();
    }
    summary_rows(&mut s, &p.features, csv);
    summary_rows(&mut s, &p.groups, csv);
    writeln!(s).unwrap();
    if csv {
        writeln!(s, ",{}", c.names.join(",")).unwrap();
        for (n, row) in c.names.iter().zip(&c.values) {
            let v: Vec<String> = row.iter().map(|x| x.to_string()).collect();
            writeln!(s, "{n},{}", v.join(",")).unwrap();
        }
    } else {
        write!(s, "{:<6}", "").unwrap();
        for n in &c.names {
            write!(s, "{n:>7}").unwrap();
        }
        writeln!(s).unwrap();
        for (n, row) in c.names.iter().zip(&c.values) {
            write!(s, "{n:<6}").unwrap();
            for v in row {
                write!(s, "{v:>7.2}").unwrap();
            }
            writeln!(s).unwrap();
        }
    }
    s
}
