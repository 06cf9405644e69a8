//! Mini-melee: a one-dimenssional two-player fighting game, rule set "MM-1".
//!
//! Arena x ∈ [−5, 5]. Per player the observed state is (position, velocity,
//! damage, facing) plus a 6-valued animation phase. Actions: noop, left,
//! right, attack, shield. An attack is a fixed pipeline — 2 steps of startup,
//! 1 active step, 2 steps of recovery — and a connected hit deals 10 damage
//! and stuns the victim for 3 steps. A hit that pushes the victim past 100
//! damage is a KO: ±1 reward and both players respawn. Rewards are mirrored
//! (zero-sum by construction): damage dealt minus damage taken at 0.01 per
//! point, plus KO differential.
//!
//! Observations are egocentric: each player sees its own block first, with
//! positions, velocities, and facings mirrored for the right-hand player so
//! that the game is exactly symmetric under swapping sides. Left/right
//! actions are mirrored the same way.

use super::{TwoPlayerEnv, TwoStep};
use crate::error::{DrlError, Result};
use crate::state::{Action, CatValue, MixedState, StateSchema};
use rand_chacha::ChaCha8Rng;

/// Rule-set version embedded in logs and match reports.
pub const MM1_VERSION: &str = "MM-1";

#[derive(Debug, Clone)]
pub struct Mm1Config {
    pub arena_half_width: f64,
    pub walk_speed: f64,
    pub attack_range: f64,
    pub hit_damage: f64,
    pub ko_damage: f64,
    pub damage_reward: f64,
    pub spawn_offset: f64,
    pub max_steps: usize,
}

impl Default for Mm1Config {
    fn default() -> Self {
        Mm1Config {
            arena_half_width: 5.0,
            walk_speed: 0.25,
            attack_range: 1.0,
            hit_damage: 10.0,
            ko_damage: 100.0,
            damage_reward: 0.01,
            spawn_offset: 2.0,
            max_steps: 1000,
        }
    }
}

/// Which side of the arena a player spawns on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlayerSide {
    Left,
    Right,
}

impl PlayerSide {
    /// Mirror sign applied to x-axis quantities in this player's ego view.
    fn sign(self) -> f64 {
        match self {
            PlayerSide::Left => 1.0,
            PlayerSide::Right => -1.0,
        }
    }
}

/// Animation bookkeeping. The attack pipeline index runs 0..=4 over
/// startup/startup/active/recovery/recovery; the stun index runs 0..=2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Anim {
    Idle,
    Walk,
    Attack(u8),
    Stunned(u8),
}

impl Anim {
    /// Observed 6-valued category.
    fn category(self) -> usize {
        match self {
            Anim::Idle => 0,
            Anim::Walk => 1,
            Anim::Attack(0 | 1) => 2,
            Anim::Attack(2) => 3,
            Anim::Attack(_) => 4,
            Anim::Stunned(_) => 5,
        }
    }

    /// If the player is locked, the phase it advances to this step.
    fn locked_next(self) -> Option<Anim> {
        match self {
            Anim::Attack(i) if i < 4 => Some(Anim::Attack(i + 1)),
            Anim::Stunned(j) if j < 2 => Some(Anim::Stunned(j + 1)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
struct Player {
    x: f64,
    vel: f64,
    damage: f64,
    facing: f64,
    anim: Anim,
    shielding: bool,
}

impl Player {
    fn spawn(side: PlayerSide, cfg: &Mm1Config) -> Player {
        Player {
            x: -side.sign() * cfg.spawn_offset,
            vel: 0.0,
            damage: 0.0,
            facing: side.sign(),
            anim: Anim::Idle,
            shielding: false,
        }
    }
}

pub struct MiniMelee {
    cfg: Mm1Config,
    schema: StateSchema,
    players: [Player; 2],
    steps: usize,
    terminal: bool,
    started: bool,
    /// Cumulative (KOs by player 0, KOs by player 1) this episode.
    ko_tally: (u32, u32),
}

impl MiniMelee {
    pub fn new(cfg: Mm1Config) -> Self {
        let players = [
            Player::spawn(PlayerSide::Left, &cfg),
            Player::spawn(PlayerSide::Right, &cfg),
        ];
        MiniMelee {
            cfg,
            schema: StateSchema::new(8, vec![6, 6]),
            players,
            steps: 0,
            terminal: false,
            started: false,
            ko_tally: (0, 0),
        }
    }

    pub fn config(&self) -> &Mm1Config {
        &self.cfg
    }

    pub fn ko_tally(&self) -> (u32, u32) {
        self.ko_tally
    }

    fn side(i: usize) -> PlayerSide {
        if i == 0 {
            PlayerSide::Left
        } else {
            PlayerSide::Right
        }
    }

    /// Egocentric observation for player `i`: own block first, x-axis
    /// quantities mirrored so both players see the arena the same way.
    pub fn observe(&self, i: usize) -> MixedState {
        let s = Self::side(i).sign();
        let me = &self.players[i];
        let other = &self.players[1 - i];
        let block = |p: &Player| {
            [
                s * p.x / self.cfg.arena_half_width,
                s * p.vel / self.cfg.walk_speed,
                p.damage / self.cfg.ko_damage,
                s * p.facing,
            ]
        };
        let mut continuous = Vec::with_capacity(8);
        continuous.extend_from_slice(&block(me));
        continuous.extend_from_slice(&block(other));
        MixedState::new(
            continuous,
            vec![
                CatValue::new(6, me.anim.category()),
                CatValue::new(6, other.anim.category()),
            ],
        )
    }

    /// Translates player `i`'s egocentric action into arena coordinates:
    /// left/right swap for the right-hand player.
    fn global_action(i: usize, a: Action) -> Action {
        if i == 1 {
            match a.index() {
                1 => Action(2),
                2 => Action(1),
                other => Action(other),
            }
        } else {
            a
        }
    }

    fn resolve_action(&mut self, i: usize, action: Action) -> Result<()> {
        let speed = self.cfg.walk_speed;
        let p = &mut self.players[i];
        p.shielding = false;
        if let Some(next) = p.anim.locked_next() {
            p.anim = next;
            p.vel = 0.0;
            return Ok(());
        }
        match action.index() {
            0 => {
                p.anim = Anim::Idle;
                p.vel = 0.0;
            }
            1 => {
                p.anim = Anim::Walk;
                p.vel = -speed;
                p.facing = -1.0;
            }
            2 => {
                p.anim = Anim::Walk;
                p.vel = speed;
                p.facing = 1.0;
            }
            3 => {
                p.anim = Anim::Attack(0);
                p.vel = 0.0;
            }
            4 => {
                p.anim = Anim::Idle;
                p.vel = 0.0;
                p.shielding = true;
            }
            a => {
                return Err(DrlError::contract(format!(
                    "mini-melee action {a} out of range"
                )))
            }
        }
        Ok(())
    }

    fn respawn_both(&mut self) {
        let cfg = self.cfg.clone();
        self.players = [
            Player::spawn(PlayerSide::Left, &cfg),
            Player::spawn(PlayerSide::Right, &cfg),
        ];
    }
}

impl TwoPlayerEnv for MiniMelee {
    fn schema(&self) -> &StateSchema {
        &self.schema
    }

    fn n_actions(&self) -> usize {
        5
    }

    fn reset(&mut self, _rng: &mut ChaCha8Rng) -> (MixedState, MixedState) {
        self.respawn_both();
        self.steps = 0;
        self.terminal = false;
        self.started = true;
        self.ko_tally = (0, 0);
        (self.observe(0), self.observe(1))
    }

    fn step(&mut self, a: Action, b: Action) -> Result<TwoStep> {
        if !self.started || self.terminal {
            return Err(DrlError::contract(
                "step on terminal mini-melee".to_string(),
            ));
        }
        self.steps += 1;

        self.resolve_action(0, Self::global_action(0, a))?;
        self.resolve_action(1, Self::global_action(1, b))?;

        let half = self.cfg.arena_half_width;
        for p in &mut self.players {
            p.x = (p.x + p.vel).clamp(-half, half);
        }

        // Hit resolution on this step's phases: simultaneous and symmetric.
        let dist = (self.players[0].x - self.players[1].x).abs();
        let active = [
            self.players[0].anim == Anim::Attack(2),
            self.players[1].anim == Anim::Attack(2),
        ];
        let in_range = dist <= self.cfg.attack_range;
        let hit_on = [
            active[1] && in_range && !self.players[0].shielding,
            active[0] && in_range && !self.players[1].shielding,
        ];

        let mut ko = [false, false];
        for v in 0..2 {
            if hit_on[v] {
                self.players[v].damage += self.cfg.hit_damage;
                self.players[v].anim = Anim::Stunned(0);
                if self.players[v].damage > self.cfg.ko_damage {
                    ko[v] = true;
                }
            }
        }

        let dealt_0 = if hit_on[1] { self.cfg.hit_damage } else { 0.0 };
        let dealt_1 = if hit_on[0] { self.cfg.hit_damage } else { 0.0 };
        let mut reward_0 = self.cfg.damage_reward * (dealt_0 - dealt_1);
        if ko[1] {
            reward_0 += 1.0;
            self.ko_tally.0 += 1;
        }
        if ko[0] {
            reward_0 -= 1.0;
            self.ko_tally.1 += 1;
        }

        if ko[0] || ko[1] {
            self.respawn_both();
        }

        self.terminal = self.steps >= self.cfg.max_steps;
        Ok(TwoStep {
            obs: (self.observe(0), self.observe(1)),
            rewards: (reward_0, -reward_0),
            terminal: self.terminal,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn env() -> MiniMelee {
        let mut e = MiniMelee::new(Mm1Config::default());
        let mut rng = RngStream::new(0, 0).rng();
        e.reset(&mut rng);
        e
    }

    const NOOP: Action = Action(0);
    const LEFT: Action = Action(1);
    const RIGHT: Action = Action(2);
    const ATTACK: Action = Action(3);
    const SHIELD: Action = Action(4);

    #[test]
    fn both_noop_is_inert() {
        let mut e = env();
        let x0 = (e.players[0].x, e.players[1].x);
        let step = e.step(NOOP, NOOP).unwrap();
        assert_eq!(step.rewards, (0.0, 0.0));
        assert_eq!((e.players[0].x, e.players[1].x), x0);
    }

    #[test]
    fn attack_active_hit_damages_and_stuns() {
        let mut e = env();
        // Place B at distance 0.5 and put A into the active phase this step.
        e.players[0].x = 0.0;
        e.players[1].x = 0.5;
        e.players[0].anim = Anim::Attack(1); // advances to Attack(2) = active
        let step = e.step(NOOP, NOOP).unwrap();
        assert!((step.rewards.0 - 0.1).abs() < 1e-12);
        assert!((step.rewards.1 + 0.1).abs() < 1e-12);
        assert_eq!(e.players[1].damage, 10.0);
        assert_eq!(e.players[1].anim, Anim::Stunned(0));
    }

    #[test]
    fn shield_blocks_hit() {
        let mut e = env();
        e.players[0].x = 0.0;
        e.players[1].x = 0.5;
        e.players[0].anim = Anim::Attack(1);
        let step = e.step(NOOP, SHIELD).unwrap();
        assert_eq!(step.rewards, (0.0, 0.0));
        assert_eq!(e.players[1].damage, 0.0);
        assert_eq!(e.players[1].anim, Anim::Idle);
    }

    #[test]
    fn ko_at_damage_over_100() {
        let mut e = env();
        e.players[0].x = 0.0;
        e.players[1].x = 0.5;
        e.players[1].damage = 95.0;
        e.players[0].anim = Anim::Attack(1);
        let step = e.step(NOOP, NOOP).unwrap();
        // 95 + 10 = 105 > 100: KO plus the damage component.
        assert!((step.rewards.0 - 1.1).abs() < 1e-12);
        assert!((step.rewards.1 + 1.1).abs() < 1e-12);
        assert_eq!(e.ko_tally(), (1, 0));
        // Both respawned.
        assert_eq!(e.players[0].x, -2.0);
        assert_eq!(e.players[1].x, 2.0);
        assert_eq!(e.players[0].damage, 0.0);
        assert_eq!(e.players[1].damage, 0.0);
    }

    #[test]
    fn hit_at_exactly_100_is_not_ko() {
        let mut e = env();
        e.players[0].x = 0.0;
        e.players[1].x = 0.5;
        e.players[1].damage = 90.0;
        e.players[0].anim = Anim::Attack(1);
        let step = e.step(NOOP, NOOP).unwrap();
        assert!((step.rewards.0 - 0.1).abs() < 1e-12);
        assert_eq!(e.players[1].damage, 100.0);
        assert_eq!(e.ko_tally(), (0, 0));
    }

    #[test]
    fn attack_pipeline_timing() {
        let mut e = env();
        // Attack chosen now: startup, startup, active, recovery, recovery,
        // then controllable again.
        e.step(ATTACK, NOOP).unwrap();
        assert_eq!(e.players[0].anim, Anim::Attack(0));
        assert_eq!(e.observe(0).categorical[0].index, 2);
        e.step(NOOP, NOOP).unwrap();
        assert_eq!(e.players[0].anim, Anim::Attack(1));
        e.step(NOOP, NOOP).unwrap();
        assert_eq!(e.players[0].anim, Anim::Attack(2));
        assert_eq!(e.observe(0).categorical[0].index, 3);
        e.step(NOOP, NOOP).unwrap();
        assert_eq!(e.players[0].anim, Anim::Attack(3));
        e.step(NOOP, NOOP).unwrap();
        assert_eq!(e.players[0].anim, Anim::Attack(4));
        assert_eq!(e.observe(0).categorical[0].index, 4);
        // Controllable again: a walk takes effect.
        e.step(RIGHT, NOOP).unwrap();
        assert_eq!(e.players[0].anim, Anim::Walk);
    }

    #[test]
    fn stun_lasts_three_steps() {
        let mut e = env();
        e.players[0].x = 0.0;
        e.players[1].x = 0.5;
        e.players[0].anim = Anim::Attack(1);
        e.step(NOOP, NOOP).unwrap();
        assert_eq!(e.players[1].anim, Anim::Stunned(0));
        // Victim inputs are ignored while stunned.
        e.step(NOOP, RIGHT).unwrap();
        assert_eq!(e.players[1].anim, Anim::Stunned(1));
        e.step(NOOP, RIGHT).unwrap();
        assert_eq!(e.players[1].anim, Anim::Stunned(2));
        let x_before = e.players[1].x;
        e.step(NOOP, RIGHT).unwrap();
        assert_eq!(e.players[1].anim, Anim::Walk);
        // Ego right for the right-hand player is global left.
        assert!(e.players[1].x < x_before);
    }

    #[test]
    fn ego_views_are_mirror_symmetric() {
        let mut e = env();
        let (oa, ob) = (e.observe(0), e.observe(1));
        assert_eq!(oa, ob, "spawn is symmetric, ego views must agree");
        // Walking toward each other keeps the views identical.
        for _ in 0..4 {
            let step = e.step(RIGHT, RIGHT).unwrap();
            assert_eq!(step.obs.0, step.obs.1);
        }
        assert!(e.players[0].x > -2.0);
        assert!(e.players[1].x < 2.0);
    }

    #[test]
    fn zero_sum_over_episode() {
        let mut e = MiniMelee::new(Mm1Config {
            max_steps: 300,
            ..Mm1Config::default()
        });
        let mut rng = RngStream::new(42, 0).rng();
        e.reset(&mut rng);
        use rand::Rng;
        let mut total = (0.0f64, 0.0f64);
        loop {
            let a = Action(rng.gen_range(0..5));
            let b = Action(rng.gen_range(0..5));
            let step = e.step(a, b).unwrap();
            assert_eq!(step.rewards.1, -step.rewards.0);
            total.0 += step.rewards.0;
            total.1 += step.rewards.1;
            if step.terminal {
                break;
            }
        }
        assert_eq!(total.0 + total.1, 0.0);
    }

    #[test]
    fn episode_ends_at_max_steps() {
        let mut e = MiniMelee::new(Mm1Config {
            max_steps: 5,
            ..Mm1Config::default()
        });
        let mut rng = RngStream::new(0, 0).rng();
        e.reset(&mut rng);
        for i in 0..5 {
            let step = e.step(NOOP, NOOP).unwrap();
            assert_eq!(step.terminal, i == 4);
        }
        assert!(e.step(NOOP, NOOP).is_err());
    }

    #[test]
    fn mutual_hits_cancel() {
        let mut e = env();
        e.players[0].x = 0.0;
        e.players[1].x = 0.5;
        e.players[0].anim = Anim::Attack(1);
        e.players[1].anim = Anim::Attack(1);
        let step = e.step(NOOP, NOOP).unwrap();
        assert_eq!(step.rewards, (0.0, 0.0));
        assert_eq!(e.players[0].damage, 10.0);
        assert_eq!(e.players[1].damage, 10.0);
        assert_eq!(e.players[0].anim, Anim::Stunned(0));
        assert_eq!(e.players[1].anim, Anim::Stunned(0));
    }

    #[test]
    fn out_of_range_attack_whiffs() {
        let mut e = env();
        e.players[0].x = -2.0;
        e.players[1].x = 2.0;
        e.players[0].anim = Anim::Attack(1);
        let step = e.step(NOOP, NOOP).unwrap();
        assert_eq!(step.rewards, (0.0, 0.0));
        assert_eq!(e.players[1].damage, 0.0);
    }
}
