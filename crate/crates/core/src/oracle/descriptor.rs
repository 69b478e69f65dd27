use crate::env::{CubeEnv, Environment, GridEnv, GridMode};

use super::OracleError;

pub const STATE_MARKER: &str = "{{STATE}}";

const CUBE8: &str = include_str!("../../templates/cube8.txt");
const IMAGE10: &str = include_str!("../../templates/image10.txt");
const ARRANGE5: &str = include_str!("../../templates/arrange5.txt");

/// Fixed task context with one slot for the rendered state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskDescriptor {
    pub id: String,
    template: String,
}

impl TaskDescriptor {
    pub fn new(id: impl Into<String>, template: impl Into<String>) -> Result<Self, OracleError> {
        let id = id.into();
        let template = template.into();
        if template.matches(STATE_MARKER).count() != 1 {
            return Err(OracleError::Marker(id));
        }
        Ok(Self { id, template })
    }

    pub fn template(&self) -> &str {
        &self.template
    }

    /// The built-in descriptor matching an environment's task and size.
    pub fn for_env<E: DescribedTask>(env: &E) -> Self {
        env.task_descriptor()
    }

    pub fn builtin(id: &str) -> Option<Self> {
        let text = match id {
            "cube8" => CUBE8,
            "image10" => IMAGE10,
            "arrange5" => ARRANGE5,
            _ => return None,
        };
        Some(Self::new(id, text).expect("built-in templates carry one marker"))
    }

    pub fn fill(&self, rendered_state: &str) -> String {
        self.template.replacen(STATE_MARKER, rendered_state, 1)
    }
}

pub fn render_prompt<E: Environment>(descriptor: &TaskDescriptor, env: &E, pattern: &E::Pattern) -> String {
    descriptor.fill(&env.render_pattern(pattern))
}

/// Environments that come with a task description for the oracle.
pub trait DescribedTask: Environment {
    fn task_descriptor(&self) -> TaskDescriptor;
}

impl DescribedTask for CubeEnv {
    fn task_descriptor(&self) -> TaskDescriptor {
        let cfg = self.config();
        if *cfg == crate::env::CubeEnvConfig::table() {
            return TaskDescriptor::builtin("cube8").unwrap();
        }
        let n = self.size();
        let mut text = String::from("A table contains the following objects: \\\n");
        for c in &cfg.cubes {
            text.push_str(&format!(
                "- {} cube of edge length {}cm \\\n(represented by '{}')\\\n",
                c.color,
                c.edge_cm,
                CubeEnv::letter(c.id)
            ));
        }
        text.push_str(
            "A human is currently stacking some\\\nof the cubes in the following \\\n\
             sequence (from bottom to top): \\\n",
        );
        text.push_str(STATE_MARKER);
        text.push_str(&format!(
            "\nYou are an organizing robot.\\\nStack the remaining cubes in the\\\n\
             pattern that human seems to be \\\nfollowing. The final stack should\\\n\
             have all {n} cubes. Lets think step by step.\\\n\
             Make sure your response contains \\\nonly the order in the form of a \\\n\
             list and not the explanation.\n"
        ));
        TaskDescriptor::new(format!("cube{n}"), text).unwrap()
    }
}

impl DescribedTask for GridEnv {
    fn task_descriptor(&self) -> TaskDescriptor {
        let (w, h) = (self.target().width(), self.target().height());
        let (base, id, size) = match self.mode() {
            GridMode::Image => ("image10", "image", "10x10"),
            GridMode::Arrangement => ("arrange5", "arrange", "5x5"),
        };
        let d = TaskDescriptor::builtin(base).unwrap();
        let dims = format!("{w}x{h}");
        if dims == size {
            return d;
        }
        TaskDescriptor::new(format!("{id}{dims}"), d.template.replace(size, &dims)).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::shapes::target_shape;
    use crate::env::{CubeEnvConfig, CubeStack, Grid, GridEnvConfig};

    #[test]
    fn marker_count_enforced() {
        assert!(TaskDescriptor::new("x", "no marker").is_err());
        assert!(TaskDescriptor::new("x", "{{STATE}} and {{STATE}}").is_err());
        assert!(TaskDescriptor::new("x", "before {{STATE}} after").is_ok());
    }

    #[test]
    fn cube_prompt_contains_letters() {
        let env = CubeEnv::new(CubeEnvConfig::table()).unwrap();
        let d = TaskDescriptor::for_env(&env);
        assert_eq!(d.id, "cube8");
        let p = render_prompt(&d, &env, &CubeStack::new(vec![5, 6, 7]));
        assert!(p.contains("sequence (from bottom to top): \\\n['e','f','g']\nYou are an organizing robot."));
        assert!(p.contains("The final stack should\\\nhave all 8 cubes."));
        assert_eq!(p, render_prompt(&d, &env, &CubeStack::new(vec![5, 6, 7])));
    }

    #[test]
    fn grid_prompt_contains_zero_matrix() {
        let env = GridEnv::new(GridEnvConfig::image(target_shape("oval10", 10, 10).unwrap())).unwrap();
        let d = TaskDescriptor::for_env(&env);
        assert_eq!(d.id, "image10");
        let zero = crate::env::grid::render_grid(&Grid::zeros(10, 10));
        let p = render_prompt(&d, &env, &Grid::zeros(10, 10));
        assert!(p.contains(&format!("If the initial image is:\\\n{zero}\nObserve the pattern")));
    }

    #[test]
    fn other_sizes_get_generated_descriptors() {
        let env = CubeEnv::new(CubeEnvConfig::with_stack_size(5).unwrap()).unwrap();
        let d = TaskDescriptor::for_env(&env);
        assert_eq!(d.id, "cube5");
        assert!(d.template().contains("have all 5 cubes"));
        assert!(d.template().contains("(represented by 'e')"));
        assert!(!d.template().contains("(represented by 'f')"));

        let arr = GridEnv::new(GridEnvConfig::arrangement(target_shape("diamond5", 5, 5).unwrap())).unwrap();
        assert_eq!(TaskDescriptor::for_env(&arr).id, "arrange5");
    }
}
