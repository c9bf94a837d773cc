//! Classic Porter stemmer (1980 algorithm), used by the unigram-alignment
//! metric's stem-match stage. Operates on lowercase ASCII words; anything
//! else is returned unchanged.

/// Stem one lowercase word.
pub fn porter_stem(word: &str) -> String {
    if word.len() <= 2 || !word.bytes().all(|b| b.is_ascii_lowercase()) {
        return word.to_string();
    }
    let mut w: Vec<u8> = word.as_bytes().to_vec();
    step_1a(&mut w);
    step_1b(&mut w);
    step_1c(&mut w);
    step_2(&mut w);
    step_3(&mut w);
    step_4(&mut w);
    step_5a(&mut w);
    step_5b(&mut w);
    String::from_utf8(w).expect("ascii in, ascii out")
}

// y counts as a vowel when preceded by a consonant.
fn is_consonant(w: &[u8], i: usize) -> bool {
    match w[i] {
        b'a' | b'e' | b'i' | b'o' | b'u' => false,
        b'y' => i == 0 || !is_consonant(w, i - 1),
        _ => true,
    }
}

// The measure m: number of VC sequences in the [C](VC)^m[V] decomposition.
fn measure(w: &[u8]) -> usize {
    let mut m = 0;
    let mut prev_vowel = false;
    for i in 0..w.len() {
        let vowel = !is_consonant(w, i);
        if prev_vowel && !vowel {
            m += 1;
        }
        prev_vowel = vowel;
    }
    m
}

fn contains_vowel(w: &[u8]) -> bool {
    (0..w.len()).any(|i| !is_consonant(w, i))
}

fn ends_double_consonant(w: &[u8]) -> bool {
    let n = w.len();
    n >= 2 && w[n - 1] == w[n - 2] && is_consonant(w, n - 1)
}

// *o: stem ends consonant-vowel-consonant and the final consonant is not
// w, x or y.
fn ends_cvc(w: &[u8]) -> bool {
    let n = w.len();
    n >= 3
        && is_consonant(w, n - 3)
        && !is_consonant(w, n - 2)
        && is_consonant(w, n - 1)
        && !matches!(w[n - 1], b'w' | b'x' | b'y')
}

fn ends_with(w: &[u8], suffix: &str) -> bool {
    w.len() >= suffix.len() && &w[w.len() - suffix.len()..] == suffix.as_bytes()
}

fn replace(w: &mut Vec<u8>, suffix: &str, by: &str) {
    let keep = w.len() - suffix.len();
    w.truncate(keep);
    w.extend_from_slice(by.as_bytes());
}

// Apply suffix -> replacement when the remaining stem satisfies `cond`.
fn rule(w: &mut Vec<u8>, suffix: &str, by: &str, cond: impl Fn(&[u8]) -> bool) -> bool {
    if ends_with(w, suffix) {
        let stem = &w[..w.len() - suffix.len()];
        if cond(stem) {
            replace(w, suffix, by);
        }
        // A matched suffix consumes the step even when the condition fails.
        true
    } else {
        false
    }
}

fn step_1a(w: &mut Vec<u8>) {
    if ends_with(w, "sses") {
        replace(w, "sses", "ss");
    } else if ends_with(w, "ies") {
        replace(w, "ies", "i");
    } else if ends_with(w, "ss") {
        // unchanged
    } else if ends_with(w, "s") {
        replace(w, "s", "");
    }
}

fn step_1b(w: &mut Vec<u8>) {
    if ends_with(w, "eed") {
        let stem = &w[..w.len() - 3];
        if measure(stem) > 0 {
            replace(w, "eed", "ee");
        }
        return;
    }
    let stripped = if ends_with(w, "ed") && contains_vowel(&w[..w.len() - 2]) {
        replace(w, "ed", "");
        true
    } else if ends_with(w, "ing") && contains_vowel(&w[..w.len() - 3]) {
        replace(w, "ing", "");
        true
    } else {
        false
    };
    if !stripped {
        return;
    }
    if ends_with(w, "at") || ends_with(w, "bl") || ends_with(w, "iz") {
        w.push(b'e');
    } else if ends_double_consonant(w) && !matches!(w[w.len() - 1], b'l' | b's' | b'z') {
        w.pop();
    } else if measure(w) == 1 && ends_cvc(w) {
        w.push(b'e');
    }
}

fn step_1c(w: &mut Vec<u8>) {
    if ends_with(w, "y") && contains_vowel(&w[..w.len() - 1]) {
        let n = w.len();
        w[n - 1] = b'i';
    }
}

fn step_2(w: &mut Vec<u8>) {
    const RULES: [(&str, &str); 20] = [
        ("ational", "ate"),
        ("tional", "tion"),
        ("enci", "ence"),
        ("anci", "ance"),
        ("izer", "ize"),
        ("abli", "able"),
        ("alli", "al"),
        ("entli", "ent"),
        ("eli", "e"),
        ("ousli", "ous"),
        ("ization", "ize"),
        ("ation", "ate"),
        ("ator", "ate"),
        ("alism", "al"),
        ("iveness", "ive"),
        ("fulness", "ful"),
        ("ousness", "ous"),
        ("aliti", "al"),
        ("iviti", "ive"),
        ("biliti", "ble"),
    ];
    for (suffix, by) in RULES {
        if rule(w, suffix, by, |stem| measure(stem) > 0) {
            return;
        }
    }
}

fn step_3(w: &mut Vec<u8>) {
    const RULES: [(&str, &str); 7] = [
        ("icate", "ic"),
        ("ative", ""),
        ("alize", "al"),
        ("iciti", "ic"),
        ("ical", "ic"),
        ("ful", ""),
        ("ness", ""),
    ];
    for (suffix, by) in RULES {
        if rule(w, suffix, by, |stem| measure(stem) > 0) {
            return;
        }
    }
}

fn step_4(w: &mut Vec<u8>) {
    const PLAIN: [&str; 18] = [
        "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement", "ment", "ent", "ou",
        "ism", "ate", "iti", "ous", "ive", "ize",
    ];
    // "ion" needs the stem to end in s or t; check it at its length rank so
    // e.g. "ement" still wins over "ent".
    const ORDERED: [&str; 19] = [
        "ement", "ance", "ence", "able", "ible", "ment", "ent", "ism", "ate", "iti", "ous",
        "ive", "ize", "ion", "al", "er", "ic", "ant", "ou",
    ];
    for suffix in ORDERED {
        if !ends_with(w, suffix) {
            continue;
        }
        let stem = &w[..w.len() - suffix.len()];
        let ok = if suffix == "ion" {
            measure(stem) > 1 && stem.last().is_some_and(|&b| b == b's' || b == b't')
        } else {
            debug_assert!(PLAIN.contains(&suffix));
            measure(stem) > 1
        };
        if ok {
            replace(w, suffix, "");
        }
        return;
    }
}

fn step_5a(w: &mut Vec<u8>) {
    if !ends_with(w, "e") {
        return;
    }
    let stem = &w[..w.len() - 1];
    let m = measure(stem);
    if m > 1 || (m == 1 && !ends_cvc(stem)) {
        w.pop();
    }
}

fn step_5b(w: &mut Vec<u8>) {
    if measure(w) > 1 && ends_double_consonant(w) && w.last() == Some(&b'l') {
        w.pop();
    }
}
