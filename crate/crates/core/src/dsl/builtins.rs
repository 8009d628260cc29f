//! Pure numeric builtins available to subject and test code.

pub const BUILTINS: &[(&str, usize)] = &[
    ("abs", 1),
    ("min", 2),
    ("max", 2),
    ("sqrt", 1),
    ("sin", 1),
    ("cos", 1),
    ("floor", 1),
    ("pi", 0),
];

pub fn arity(name: &str) -> Option<usize> {
    BUILTINS.iter().find(|(n, _)| *n == name).map(|(_, a)| *a)
}

pub fn is_builtin(name: &str) -> bool {
    arity(name).is_some()
}
