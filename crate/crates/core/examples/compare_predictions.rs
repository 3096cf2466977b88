//! Side-by-side comparison of two prediction files over the same samples.

use foodbench::interchange::{
    compare, comparison_text, read_predictions, write_predictions, PredictionFile, PredictionHeader,
    PredictionRecord,
};

fn system(name: &str, mistakes: &[usize]) -> PredictionFile {
    let classes: Vec<String> = ["cat", "dog"].map(String::from).to_vec();
    let records = (0..20)
        .map(|i| {
            let actual = &classes[i % 2];
            let predicted = if mistakes.contains(&i) { &classes[1 - i % 2] } else { actual };
            PredictionRecord::new(format!("img{i:02}"), actual.clone(), predicted.clone())
        })
        .collect();
    PredictionFile::new(PredictionHeader::new(name, classes), records).unwrap()
}

fn main() {
    let a = system("svm", &[1, 4, 7]);
    let b = system("cnn", &[2, 9]);

    // interchange files are plain JSON lines
    let mut buf = Vec::new();
    write_predictions(&a, &mut buf).unwrap();
    println!("{}", String::from_utf8_lossy(&buf).lines().take(2).collect::<Vec<_>>().join("\n"));
    let a = read_predictions(buf.as_slice()).unwrap();

    let report = compare(&a, &b).expect("compare");
    print!("\n{}", comparison_text(&report));
}
