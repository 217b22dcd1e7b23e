use super::{parse_program, HornProgram};

/// Helper rules deciding whether a block must move before the operating
/// world can match the target world. Input relations compare world id,
/// block id and both coordinates over every pair of objects.
pub const SHOULDMOVE_RULES: &str = "\
IsGround(x) <- forall y Above(y,x)
SameXAbove(x,y) <- SameWorldID(x,y) & SameX(x,y) & Above(x,y)
Clear(x) <- forall y !SameXAbove(y,x)
Moveable(x) <- Clear(x) & !IsGround(x)
InitialWorld(x) <- forall y !SmallerWorldID(y,x)
Match(x,y) <- !SameWorldID(x,y) & SameID(x,y) & SameX(x,y) & SameY(x,y)
Matched(x) <- exists y Match(x,y)
HaveUnmatchedBelow(x) <- exists y SameXAbove(x,y) & !Matched(y)
ShouldMove(x) <- InitialWorld(x) & Moveable(x) & HaveUnmatchedBelow(x)
";

pub fn shouldmove_fixture() -> HornProgram {
    parse_program(SHOULDMOVE_RULES).expect("fixture parses")
}
