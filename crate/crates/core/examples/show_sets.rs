fn main() {
    let (s1, s2) = limn_core::stimuli::default_sets();
    println!("--- set 1 ---");
    for (i, s) in s1.iter().enumerate() {
        println!("[{i:2}] ({} strokes) {}", s.len(), limn_core::stimuli::describe(s));
    }
    println!("--- set 2 ---");
    for (i, s) in s2.iter().enumerate() {
        println!("[{i:2}] ({} strokes) {}", s.len(), limn_core::stimuli::describe(s));
    }
}
