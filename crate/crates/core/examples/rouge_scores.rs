// ROUGE-1/2/L of a candidate summary against a reference.

use latsum::corpus::tokenize;
use latsum::rouge::{rouge_mean, RougeTriple};

pub fn run_example() -> latsum::Result<()> {
    let reference = [tokenize("The council approved a new bridge.")?, tokenize("Work starts in May.")?];
    let candidate = [tokenize("The council in Riverton approved a bridge on Monday.")?];

    let t = RougeTriple::compute(&candidate, &reference);
    for (name, s) in [("ROUGE-1", t.rouge_1), ("ROUGE-2", t.rouge_2), ("ROUGE-L", t.rouge_l)] {
        println!("{name}: P {:.3} R {:.3} F {:.3}", s.precision, s.recall, s.f1);
    }
    println!("mean of R1/R2 F1: {:.3}", rouge_mean(&candidate, &reference));
    Ok(())
}

fn main() -> latsum::Result<()> {
    run_example()
}
