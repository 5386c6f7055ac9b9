use super::{Step, TaskError, TaskRecipe};

/// Parses an LLM recipe response into a recipe of simple steps.
///
/// The expected format is one step per line, numbered from 1 without gaps:
/// `1. Boil water` or `1) Boil water`. Blank lines are ignored; any other line
/// makes the response unparseable.
pub fn validate_generated_recipe(task_name: &str, response: &str) -> Result<TaskRecipe, TaskError> {
    let mut steps = Vec::new();
    for (lineno, line) in response.lines().enumerate().map(|(i, l)| (i + 1, l.trim())) {
        if line.is_empty() {
            continue;
        }
        let digits: String = line.chars().take_while(|c| c.is_ascii_digit()).collect();
        let rest = &line[digits.len()..];
        let body = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')'));
        let (Ok(n), Some(body)) = (digits.parse::<usize>(), body) else {
            return Err(TaskError::UnparseableRecipe(format!("line {lineno} is not a numbered step: {line:?}")));
        };
        if n != steps.len() + 1 {
            return Err(TaskError::UnparseableRecipe(format!(
                "line {lineno}: expected step {}, found {n}",
                steps.len() + 1
            )));
        }
        let body = body.trim();
        if body.is_empty() {
            return Err(TaskError::UnparseableRecipe(format!("step {n} has no instruction")));
        }
        steps.push(Step::Simple { instruction: body.to_string(), expected_duration_s: None, holograms: vec![] });
    }
    if steps.is_empty() {
        return Err(TaskError::UnparseableRecipe("response contains no steps".into()));
    }
    Ok(TaskRecipe { name: task_name.trim().to_string(), steps })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_lines_two_steps() {
        let r = validate_generated_recipe("pasta", "1. Boil water\n2. Add pasta").unwrap();
        assert_eq!(r.steps.len(), 2);
        assert_eq!(r.steps[1].instruction(), "Add pasta");
    }

    #[test]
    fn empty_and_malformed_rejected() {
        for bad in ["", "   \n", "Boil water", "1. a\n3. b", "1.", "2. start at two"] {
            assert!(matches!(validate_generated_recipe("x", bad), Err(TaskError::UnparseableRecipe(_))), "{bad:?}");
        }
    }

    #[test]
    fn paren_numbering_and_blank_lines() {
        let r = validate_generated_recipe("x", "\n1) a\n\n2) b\n").unwrap();
        assert_eq!(r.steps.len(), 2);
    }
}
