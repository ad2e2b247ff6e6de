"""Hand-built levels used as fixtures across the test suite."""

from __future__ import annotations

from adaptive_levels.level import SHAPES, Block, Level, Pig, Structure, TNT


def unit_block(x: float, y: float, material: str = "wood") -> Block:
    return Block(0, material, x, y, *SHAPES[0])


def ground(*blocks: Block) -> Structure:
    return Structure("ground", 0.0, tuple(blocks))


def exposed_pig(birds=("red", "red", "red"), x: float = 26.0) -> Level:
    """One pig alone on the ground in open view, where the low arc reaches it."""
    return Level(birds=tuple(birds), structures=(), pigs=(Pig(x, 0.0),), tnt=())


def ice_shielded_pig() -> Level:
    """A single ice block standing right in front of a pig."""
    return Level(
        birds=("red",),
        structures=(ground(Block(7, "ice", 37.0, 0.0, *SHAPES[7])),),
        pigs=(Pig(38.0, 0.0),),
        tnt=(),
    )


def stone_fortress(birds=("red",)) -> Level:
    """A pig sealed inside a thick solid box of stone unit blocks."""
    pig_x, pig_y = 60.0, 0.0
    # a 4-wide slab roofs the pig's cell so that every block sits on blocks
    blocks = [Block(3, "stone", 59.0, 2.0, *SHAPES[3])]
    for ix in range(52, 70):
        for iy in range(0, 9):
            x, y = float(ix), float(iy)
            if pig_x <= x < pig_x + 2 and pig_y <= y < pig_y + 2:
                continue
            if 59 <= x < 63 and y == 2.0:
                continue
            blocks.append(unit_block(x, y, "stone"))
    return Level(birds=tuple(birds), structures=(ground(*blocks),), pigs=(Pig(pig_x, pig_y),), tnt=())


def tnt_cluster() -> Level:
    """Pigs huddled round a TNT box behind a low wooden wall."""
    wall = [unit_block(45.0, float(y), "wood") for y in range(3)]
    return Level(
        birds=("red", "red", "red"),
        structures=(ground(*wall),),
        pigs=(Pig(48.0, 0.0), Pig(52.0, 0.0)),
        tnt=(TNT(50.5, 0.0),),
    )


def material_fortress(material: str, with_tnt: int = 0) -> Level:
    """A 3x3 block of one material with a pig on top and optional TNT beside it."""
    blocks = [unit_block(float(x), float(y), material) for x in range(50, 53) for y in range(3)]
    tnt = tuple(TNT(40.0 + 2 * k, 0.0) for k in range(with_tnt))
    return Level(birds=("red", "red"), structures=(ground(*blocks),), pigs=(Pig(50.5, 3.0),), tnt=tnt)
