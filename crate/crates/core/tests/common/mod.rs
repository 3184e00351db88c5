#![allow(dead_code)]

use std::path::PathBuf;

use sdgimpute::search_provider::LocalCorpus;
use sdgimpute::tabular::Table;

pub fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

pub fn read(name: &str) -> String {
    std::fs::read_to_string(data(name)).unwrap()
}

const UNI_HEAD: [&str; 10] = ["Aur", "Bel", "Cor", "Dal", "Eri", "Fen", "Gal", "Hol", "Ist", "Jor"];
const UNI_TAIL: [&str; 10] = ["ania", "ford", "mont", "wick", "ston", "dale", "view", "gate", "more", "ridge"];
const GIVEN: [&str; 10] = ["Lin", "Mei", "Tao", "Yun", "Hao", "Jie", "Ning", "Rui", "Xin", "Yue"];
const FAMILY: [&str; 10] = ["Zhou", "Wang", "Chen", "Liu", "Zhao", "Sun", "Qian", "Guo", "Ma", "Luo"];
const CITIES: [(&str, &str); 20] = [
    ("Harbin", "Heilongjiang"),
    ("Shenyang", "Liaoning"),
    ("Dalian", "Liaoning"),
    ("Changchun", "Jilin"),
    ("Jinan", "Shandong"),
    ("Qingdao", "Shandong"),
    ("Nanjing", "Jiangsu"),
    ("Suzhou", "Jiangsu"),
    ("Hangzhou", "Zhejiang"),
    ("Ningbo", "Zhejiang"),
    ("Wuhan", "Hubei"),
    ("Changsha", "Hunan"),
    ("Chengdu", "Sichuan"),
    ("Mianyang", "Sichuan"),
    ("Guangzhou", "Guangdong"),
    ("Shenzhen", "Guangdong"),
    ("Xiamen", "Fujian"),
    ("Fuzhou", "Fujian"),
    ("Xian", "Shaanxi"),
    ("Lanzhou", "Gansu"),
];

pub const UNIVERSITY_RULES: &str = "\
u1: University -> Principal, City, Province
u2: City -> Province
";

/// 100 universities, each with one principal and one city; City determines Province.
pub struct University {
    pub table: Table,
    pub corpus: LocalCorpus,
    pub principals: Vec<String>,
    pub cities: Vec<String>,
    pub provinces: Vec<String>,
}

pub fn university() -> University {
    let mut rows: Vec<Vec<Option<String>>> = Vec::new();
    let mut docs = Vec::new();
    for i in 0..100 {
        let uni = format!("{}{} University", UNI_HEAD[i / 10], UNI_TAIL[i % 10]);
        // a different pairing so principals do not line up with university names
        let principal = format!("{} {}", GIVEN[i % 10], FAMILY[(i / 10 + 3 * (i % 10)) % 10]);
        let (city, province) = CITIES[(i * 7) % 20];
        docs.push((
            format!("u{i:03}-p"),
            format!("... {principal} is the principal of {uni}. The campus ..."),
        ));
        docs.push((
            format!("u{i:03}-l"),
            format!("{uni} is located in {city}, {province}."),
        ));
        rows.push(
            [format!("{i}"), uni, principal, city.to_string(), province.to_string()]
                .into_iter()
                .map(Some)
                .collect(),
        );
    }
    let table = Table::new(
        "university",
        ["ID", "University", "Principal", "City", "Province"]
            .map(String::from)
            .to_vec(),
        rows,
    )
    .unwrap();
    let column = |c: usize| -> Vec<String> {
        let mut v: Vec<String> = table.rows().iter().map(|r| r[c].clone().unwrap()).collect();
        v.sort();
        v.dedup();
        v
    };
    University {
        principals: column(2),
        cities: column(3),
        provinces: column(4),
        corpus: LocalCorpus::from_pairs(docs),
        table,
    }
}

impl University {
    pub fn dictionaries(&self) -> std::collections::BTreeMap<String, Vec<String>> {
        [
            ("Principal".to_string(), self.principals.clone()),
            ("City".to_string(), self.cities.clone()),
            ("Province".to_string(), self.provinces.clone()),
        ]
        .into_iter()
        .collect()
    }
}
