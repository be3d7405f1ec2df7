//! Commits travel between replicas and wait for their dependencies.

use causal_ac::crdt::{CrdtType, ReadResult, ReplicaId, UpdateOp};
use causal_ac::store::{BoundObject, Cluster, Consistency};

fn main() {
    let (r0, r1, r2) = (ReplicaId(0), ReplicaId(1), ReplicaId(2));
    let mut cluster = Cluster::new(3, Consistency::Causal);
    let question = BoundObject::new("forum", "question", CrdtType::MvReg);
    let answers = BoundObject::new("forum", "answers", CrdtType::OrSet);

    let mut tx = cluster.begin(r0).unwrap();
    cluster
        .update(&mut tx, &question, UpdateOp::assign("Does it converge?"))
        .unwrap();
    let asked = cluster.commit(&mut tx).unwrap();
    println!("{} asked at {r0}", asked.id());

    cluster.deliver(r1, &asked).unwrap();
    let mut tx = cluster.begin(r1).unwrap();
    if let ReadResult::Values(vs) = cluster.read(&mut tx, &question).unwrap() {
        for v in vs {
            println!("{r1} reads {:?}", String::from_utf8_lossy(&v));
        }
    }
    cluster.update(&mut tx, &answers, UpdateOp::set_add(["Yes."])).unwrap();
    let answered = cluster.commit(&mut tx).unwrap();
    println!("{} answered at {r1}", answered.id());

    // The answer reaches r2 first and waits for the question.
    println!("answer at {r2}: {:?}", cluster.deliver(r2, &answered).unwrap());
    println!("question at {r2}: {:?}", cluster.deliver(r2, &asked).unwrap());
    let log: Vec<String> = cluster
        .replica(r2)
        .unwrap()
        .log()
        .iter()
        .map(|c| c.to_string())
        .collect();
    println!("{r2} applied {}", log.join(", "));

    cluster.flush().unwrap();
    println!("converged: {}", cluster.converged());

    // Without the causality check the answer is visible alone.
    let mut eventual = Cluster::new(3, Consistency::Eventual);
    let mut tx = eventual.begin(r1).unwrap();
    eventual.update(&mut tx, &answers, UpdateOp::set_add(["Yes."])).unwrap();
    let lone = eventual.commit(&mut tx).unwrap();
    println!("eventual delivery: {:?}", eventual.deliver(r2, &lone).unwrap());
}
