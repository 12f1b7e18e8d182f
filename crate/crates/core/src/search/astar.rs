use super::{Frontier, Outcome, SearchError, SearchNode, SearchSpace, Tracer};

/// A* over `space`. Returns the first goal popped from the frontier; when a
/// frontier cap has evicted every open node, the best goal seen instead.
pub fn astar<S: SearchSpace>(
    space: &S,
    frontier_size: Option<usize>,
) -> Result<Outcome<S::State>, SearchError> {
    let mut tracer = Tracer::new();
    let mut nodes: Vec<SearchNode<S::State>> =
        vec![SearchNode::from_edge(space.root()?, 0, 0, None)];
    let mut frontier = Frontier::default();
    frontier.push(&nodes[0]);
    let mut best_goal: Option<usize> = None;
    let mut expanded = 0;
    let mut answer = None;
    while let Some(idx) = frontier.pop() {
        if nodes[idx].is_goal {
            answer = Some(idx);
            break;
        }
        let (state, g, depth) = (nodes[idx].state.clone(), nodes[idx].g, nodes[idx].depth);
        let children = space.expand(&state, g, depth)?;
        expanded += 1;
        for e in children {
            let id = nodes.len();
            let child = SearchNode::from_edge(e, depth + 1, id, Some(idx));
            if child.is_goal
                && tracer.offer(child.f, space.programs_trained(), expanded) {
                    best_goal = Some(id);
                }
            frontier.push(&child);
            nodes.push(child);
        }
        if let Some(cap) = frontier_size {
            frontier.truncate(cap);
        }
    }
    let pick = match (answer, best_goal) {
        (Some(a), Some(b)) if nodes[b].f < nodes[a].f => b,
        (Some(a), _) => a,
        (None, Some(b)) => b,
        (None, None) => return Err(SearchError::NoGoal),
    };
    let trace = tracer.finish(space.programs_trained(), expanded);
    Ok(Outcome {
        best: nodes[pick].clone(),
        trace,
        nodes_expanded: expanded,
        scored: nodes,
        fmin_history: Vec::new(),
    })
}
