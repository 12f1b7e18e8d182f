use super::{Frontier, Outcome, SearchError, SearchNode, SearchSpace, Tracer};

/// Knobs of the deepening search, normally taken from the search config.
#[derive(Debug, Clone, Copy)]
pub struct IddfsParams {
    pub initial_depth: usize,
    pub max_depth: usize,
    pub perf_mult: f64,
    pub depth_bias: f64,
    pub frontier_size: Option<usize>,
}

impl IddfsParams {
    /// m(depth) = perf_mult · depth_bias^(depth − initial_depth), clamped to (0, 1].
    fn multiplier(&self, depth: usize) -> f64 {
        let e = depth as f64 - self.initial_depth as f64;
        (self.perf_mult * self.depth_bias.powf(e)).clamp(f64::MIN_POSITIVE, 1.0)
    }
}

/// Depth-limited best-first descent with iterative deepening and
/// branch-and-bound pruning against the best goal found so far.
pub fn iddfs<S: SearchSpace>(
    space: &S,
    params: IddfsParams,
) -> Result<Outcome<S::State>, SearchError> {
    if params.initial_depth > params.max_depth {
        return Err(SearchError::Invalid(
            "initial_depth must not exceed max_depth".into(),
        ));
    }
    let mut tracer = Tracer::new();
    let mut nodes: Vec<SearchNode<S::State>> =
        vec![SearchNode::from_edge(space.root()?, 0, 0, None)];
    let mut frontier = Frontier::default();
    let mut next = Frontier::default();
    frontier.push(&nodes[0]);
    let mut f_min = f64::INFINITY;
    let mut best: Option<usize> = None;
    let mut d_iter = params.initial_depth;
    let mut expanded = 0;
    let mut history = Vec::new();
    let mut current: Option<usize> = None;
    loop {
        if current.is_none() {
            match frontier.pop() {
                Some(i) => current = Some(i),
                None if next.is_empty() => break,
                None => {
                    history.push(f_min);
                    frontier = std::mem::take(&mut next);
                    d_iter += 1;
                    continue;
                }
            }
        }
        let idx = current.take().expect("set above");
        let node = &nodes[idx];
        if node.is_goal {
            if node.f < f_min {
                f_min = node.f;
                best = Some(idx);
                tracer.offer(f_min, space.programs_trained(), expanded);
            }
            continue;
        }
        if node.f * params.multiplier(node.depth) > f_min {
            continue;
        }
        if node.depth > d_iter {
            next.push(node);
            continue;
        }
        let (state, g, depth) = (node.state.clone(), node.g, node.depth);
        let children = space.expand(&state, g, depth)?;
        expanded += 1;
        let first = nodes.len();
        for e in children {
            let id = nodes.len();
            nodes.push(SearchNode::from_edge(e, depth + 1, id, Some(idx)));
        }
        // Descend into the lowest-f child; the rest join the frontier.
        let lowest = (first..nodes.len()).min_by(|&a, &b| {
            nodes[a]
                .f
                .total_cmp(&nodes[b].f)
                .then(nodes[b].depth.cmp(&nodes[a].depth))
        });
        for i in first..nodes.len() {
            if Some(i) != lowest {
                frontier.push(&nodes[i]);
            }
        }
        if let Some(cap) = params.frontier_size {
            frontier.truncate(cap);
        }
        current = lowest;
    }
    history.push(f_min);
    let best = best.ok_or(SearchError::NoGoal)?;
    let trace = tracer.finish(space.programs_trained(), expanded);
    Ok(Outcome {
        best: nodes[best].clone(),
        trace,
        nodes_expanded: expanded,
        scored: nodes,
        fmin_history: history,
    })
}
